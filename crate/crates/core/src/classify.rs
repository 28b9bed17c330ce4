//! Approximate-controllability verdicts and minimal-time estimates.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{eigenfunction, Interval, QuadratureRule, PI};
use crate::spectral::{compute_iak, compute_ik, compute_limits, compute_tau_g, CouplingIndex, CouplingPair, ModeFunction, Kernel};

/// Default cap above which a growing ratio table is read as an infinite time.
pub const RATIO_CAP: f64 = 50.0;

/// Tolerance on the first witness component over the control region.
pub const WITNESS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Yes,
    No { witness: usize },
    InconclusiveBeyondK,
}

impl Verdict {
    /// Process exit code: 0 yes, 2 no, 3 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Yes => 0,
            Verdict::No { .. } => 2,
            Verdict::InconclusiveBeyondK => 3,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Yes => f.write_str("yes"),
            Verdict::No { witness } => write!(f, "no (witness k={witness})"),
            Verdict::InconclusiveBeyondK => f.write_str("inconclusive-beyond-K"),
        }
    }
}

/// `I_k` and `I_(a,k)` for `k = 1..=K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexTable {
    pub a: f64,
    pub ik: Vec<CouplingIndex>,
    pub iak: Vec<CouplingIndex>,
    pub zero_threshold: f64,
}

impl IndexTable {
    pub fn compute(cp: &CouplingPair, a: f64, k_max: usize, rule: &QuadratureRule) -> Result<Self> {
        let rows: Result<Vec<(CouplingIndex, CouplingIndex)>> = (1..=k_max)
            .into_par_iter()
            .map(|k| Ok((compute_ik(cp, k, rule)?, compute_iak(cp, a, k, rule)?)))
            .collect();
        let (ik, iak) = rows?.into_iter().unzip();
        Ok(IndexTable { a, ik, iak, zero_threshold: cp.zero_threshold() })
    }

    pub fn len(&self) -> usize {
        self.ik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ik.is_empty()
    }

    fn both_zero(&self, k: usize) -> bool {
        self.ik[k - 1].is_zero(self.zero_threshold) && self.iak[k - 1].is_zero(self.zero_threshold)
    }

    /// Modes where both indices vanish.
    pub fn failing_modes(&self) -> Vec<usize> {
        (1..=self.len()).filter(|&k| self.both_zero(k)).collect()
    }

    /// Modes where `I_k` vanishes.
    pub fn zero_ik_modes(&self) -> Vec<usize> {
        (1..=self.len()).filter(|&k| self.ik[k - 1].is_zero(self.zero_threshold)).collect()
    }
}

fn intersects(cp: &CouplingPair, omega: &Interval) -> bool {
    !cp.avoids(omega)
}

pub fn approx_distributed(cp: &CouplingPair, omega: &Interval, k_max: usize, rule: &QuadratureRule) -> Result<Verdict> {
    let table = IndexTable::compute(cp, omega.lo(), k_max, rule)?;
    distributed_verdict(cp, omega, &table, rule)
}

fn distributed_verdict(cp: &CouplingPair, omega: &Interval, table: &IndexTable, rule: &QuadratureRule) -> Result<Verdict> {
    if table.is_empty() {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    if intersects(cp, omega) {
        return Ok(Verdict::Yes);
    }
    if let Some(&k) = table.failing_modes().first() {
        return Ok(Verdict::No { witness: k });
    }
    let lim = compute_limits(cp, omega.lo(), table.len(), rule)?;
    let eps = table.zero_threshold;
    Ok(if lim.i.abs() + lim.i_a.abs() > eps { Verdict::Yes } else { Verdict::InconclusiveBeyondK })
}

pub fn approx_boundary(cp: &CouplingPair, k_max: usize, rule: &QuadratureRule) -> Result<Verdict> {
    let table = IndexTable::compute(cp, PI, k_max, rule)?;
    boundary_verdict(cp, &table, rule)
}

fn boundary_verdict(cp: &CouplingPair, table: &IndexTable, rule: &QuadratureRule) -> Result<Verdict> {
    if table.is_empty() {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    if let Some(&k) = table.zero_ik_modes().first() {
        return Ok(Verdict::No { witness: k });
    }
    let lim = compute_limits(cp, PI, table.len(), rule)?;
    Ok(if lim.i.abs() > table.zero_threshold { Verdict::Yes } else { Verdict::InconclusiveBeyondK })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub k: usize,
    pub ratio: f64,
}

/// Finite-K surrogate of a limsup: the maximum ratio over the upper half
/// of the computed modes, with the whole table kept for inspection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEstimate {
    /// Clamped at zero; `+inf` when the table blows up.
    pub value: f64,
    /// Maximum ratio over `[K/2, K]` before clamping.
    pub raw_max: f64,
    pub table: Vec<RatioRow>,
}

fn limsup_surrogate(table: Vec<RatioRow>, cap: f64) -> TimeEstimate {
    let n = table.len();
    let lo = (n / 2).max(1);
    let top = &table[lo - 1..];
    let raw_max = top.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let q = &table[(3 * n / 4).min(n - 1)..];
    let increasing = q.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    let value = if raw_max > cap && increasing { f64::INFINITY } else { raw_max.max(0.0) };
    TimeEstimate { value, raw_max, table }
}

fn require_nonzero(modes: Vec<usize>, what: &str) -> Result<()> {
    if modes.is_empty() {
        Ok(())
    } else {
        Err(Error::FailedPrecondition { modes, reason: format!("{what} vanishes") })
    }
}

pub fn t0_from_table(table: &IndexTable, cap: f64) -> Result<TimeEstimate> {
    require_nonzero(table.failing_modes(), "|I_k| + |I_(a,k)|")?;
    let rows = (1..=table.len())
        .map(|k| {
            let (a, b) = (-table.ik[k - 1].ln_abs, -table.iak[k - 1].ln_abs);
            RatioRow { k, ratio: a.min(b) / (k * k) as f64 }
        })
        .collect();
    Ok(limsup_surrogate(rows, cap))
}

pub fn t1_from_table(table: &IndexTable, cap: f64) -> Result<TimeEstimate> {
    require_nonzero(table.zero_ik_modes(), "I_k")?;
    let rows = (1..=table.len())
        .map(|k| RatioRow { k, ratio: -table.ik[k - 1].ln_abs / (k * k) as f64 })
        .collect();
    Ok(limsup_surrogate(rows, cap))
}

/// `limsup min(-ln|I_k|, -ln|I_(a,k)|) / k^2`.
pub fn estimate_t0(cp: &CouplingPair, a: f64, k_max: usize, rule: &QuadratureRule) -> Result<TimeEstimate> {
    t0_from_table(&IndexTable::compute(cp, a, k_max, rule)?, RATIO_CAP)
}

/// `limsup -ln|I_k| / k^2`.
pub fn estimate_t1(cp: &CouplingPair, k_max: usize, rule: &QuadratureRule) -> Result<TimeEstimate> {
    t1_from_table(&IndexTable::compute(cp, PI, k_max, rule)?, RATIO_CAP)
}

/// Adjoint eigenfunction `Phi*_(1,k) - tau_k Phi*_(2,k)` whose observed
/// component vanishes on the control region.
#[derive(Clone, Debug)]
pub struct Witness {
    pub k: usize,
    pub tau: f64,
    /// `sup_omega |psi*_k - tau_k phi_k|`, sampled.
    pub first_component_sup: f64,
    pub verified: bool,
    pub psi_star: ModeFunction,
}

impl Witness {
    /// First component `psi*_k - tau_k phi_k`.
    pub fn first(&self, x: f64) -> f64 {
        self.psi_star.value(x) - self.tau * eigenfunction(self.k).expect("k >= 1").value(x)
    }
    /// Second component `phi_k`.
    pub fn second(&self, x: f64) -> f64 {
        eigenfunction(self.k).expect("k >= 1").value(x)
    }
}

pub fn fattorini_witness(cp: &Arc<CouplingPair>, omega: &Interval, k: usize, rule: &QuadratureRule) -> Result<Option<Witness>> {
    let eps = cp.zero_threshold();
    let (ik, iak) = (compute_ik(cp, k, rule)?, compute_iak(cp, omega.lo(), k, rule)?);
    if !(ik.is_zero(eps) && iak.is_zero(eps)) {
        return Ok(None);
    }
    let tg = compute_tau_g(cp, omega, k, rule)?;
    let psi_star = ModeFunction::new(cp.clone(), k, Kernel::Adjoint, tg.ik.value);
    let phi = eigenfunction(k)?;
    let n = 512;
    let sup = (0..=n)
        .map(|i| {
            let x = omega.lo() + omega.len() * i as f64 / n as f64;
            (psi_star.value(x) - tg.tau * phi.value(x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(Some(Witness { k, tau: tg.tau, first_component_sup: sup, verified: sup <= WITNESS_TOL, psi_star }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub support_intersects: bool,
    pub failing_modes: Vec<usize>,
    pub approx_controllable_distributed: Verdict,
    pub approx_controllable_boundary: Verdict,
    pub t0: Option<TimeEstimate>,
    pub t1: Option<TimeEstimate>,
    pub k: usize,
    pub zero_threshold: f64,
}

impl ClassificationReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let est = |e: &Option<TimeEstimate>| e.as_ref().map_or("undefined".to_string(), |t| format!("{:.16e}", t.value));
        let mut s = String::new();
        s.push_str(&format!("K={}\n", self.k));
        s.push_str(&format!("zero_threshold={:.16e}\n", self.zero_threshold));
        s.push_str(&format!("support_intersects={}\n", self.support_intersects));
        s.push_str(&format!("failing_modes={:?}\n", self.failing_modes));
        s.push_str(&format!("approx_distributed={}\n", self.approx_controllable_distributed));
        s.push_str(&format!("approx_boundary={}\n", self.approx_controllable_boundary));
        s.push_str(&format!("T0_estimate={}\n", est(&self.t0)));
        s.push_str(&format!("T1_estimate={}\n", est(&self.t1)));
        s
    }
}

/// Full classification at truncation `k_max`.
pub fn classify(cp: &CouplingPair, omega: &Interval, k_max: usize, rule: &QuadratureRule) -> Result<ClassificationReport> {
    let table = IndexTable::compute(cp, omega.lo(), k_max, rule)?;
    let boundary_table = IndexTable { a: PI, iak: table.ik.clone(), ..table.clone() };
    let distributed = distributed_verdict(cp, omega, &table, rule)?;
    let boundary = boundary_verdict(cp, &boundary_table, rule)?;
    Ok(ClassificationReport {
        support_intersects: intersects(cp, omega),
        failing_modes: table.failing_modes(),
        approx_controllable_distributed: distributed,
        approx_controllable_boundary: boundary,
        t0: t0_from_table(&table, RATIO_CAP).ok(),
        t1: t1_from_table(&table, RATIO_CAP).ok(),
        k: k_max,
        zero_threshold: table.zero_threshold,
    })
}
