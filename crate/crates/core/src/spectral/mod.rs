//! Coupling indices and the (generalized) eigenfunctions of the coupled
//! operator and its adjoint.

mod coupling;
mod initial;
mod mode;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use coupling::{
    compute_iak, compute_ik, compute_limits, CosineSeries, CosineTerm, CouplingIndex, CouplingPair, CouplingSpec,
    IndexLimits, SeriesExtent,
};
pub use initial::{expand_initial_data, InitialCoefficients, InitialData, ModeAmplitude, Profile};
pub use mode::{Kernel, ModeFunction};

use crate::error::Result;
use crate::funcspace::{integrate_fn, Interval, QuadratureRule, SineMode, PI, SINE_NORM};

/// Adjoint generalized eigenfunction `psi*_k` (first component of `Phi*_(1,k)`).
pub fn build_psi_star(cp: &Arc<CouplingPair>, k: usize, rule: &QuadratureRule) -> Result<ModeFunction> {
    let ik = compute_ik(cp, k, rule)?;
    Ok(ModeFunction::new(cp.clone(), k, Kernel::Adjoint, ik.value))
}

/// Direct generalized eigenfunction `psi_k` (second component of `Phi_(2,k)`).
pub fn build_psi(cp: &Arc<CouplingPair>, k: usize, rule: &QuadratureRule) -> Result<ModeFunction> {
    let ik = compute_ik(cp, k, rule)?;
    Ok(ModeFunction::new(cp.clone(), k, Kernel::Direct, ik.value))
}

/// Decomposition `psi*_k = tau_k phi_k + g_k` on a control region free of coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauG {
    pub k: usize,
    pub tau: f64,
    pub ik: CouplingIndex,
    pub iak: CouplingIndex,
}

impl TauG {
    pub fn g(&self, x: f64) -> f64 {
        let kf = self.k as f64;
        let (s, c) = (kf * x).sin_cos();
        let growing = -(self.ik.value / kf) * SINE_NORM * (s - kf * x * c) / (2.0 * kf);
        let bounded = -(0.5 * PI).sqrt() / kf * self.iak.value * c;
        growing + bounded
    }

    /// Part of g proportional to `I_k`, per unit `I_k`.
    pub fn g_ik_part(&self, x: f64) -> f64 {
        let kf = self.k as f64;
        let (s, c) = (kf * x).sin_cos();
        -(1.0 / kf) * SINE_NORM * (s - kf * x * c) / (2.0 * kf)
    }

    /// Part of g proportional to `I_(a,k)`, per unit `I_(a,k)`.
    pub fn g_iak_part(&self, x: f64) -> f64 {
        let kf = self.k as f64;
        -(0.5 * PI).sqrt() / kf * (kf * x).cos()
    }

    pub fn reconstruct(&self, x: f64) -> f64 {
        self.tau * SineMode::new_unchecked(self.k).value(x) + self.g(x)
    }
}

/// `tau_k` and `g_k`; requires p and q to vanish on `omega`.
pub fn compute_tau_g(cp: &Arc<CouplingPair>, omega: &Interval, k: usize, rule: &QuadratureRule) -> Result<TauG> {
    cp.require_disjoint(omega)?;
    let a = omega.lo();
    let ik = compute_ik(cp, k, rule)?;
    let iak = compute_iak(cp, a, k, rule)?;
    let psi = ModeFunction::new(cp.clone(), k, Kernel::Adjoint, ik.value);
    let phi = SineMode::new_unchecked(k);
    let kf = k as f64;
    let inner = integrate_fn(
        |x| {
            let v = phi.value(x);
            let drive = cp.dp().eval(x) * v + cp.p().eval(x) * phi.deriv(x) - cp.q(x) * v;
            (kf * x).cos() * drive
        },
        0.0,
        a,
        &cp.breaks(),
        2.0 * kf + cp.q_frequency(),
        rule,
    )?
    .value;
    let tau = psi.alpha() - (0.5 * PI).sqrt() / kf * inner;
    Ok(TauG { k, tau, ik, iak })
}

/// Options for building spectral records.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub rule: QuadratureRule,
    /// Compute the spectral eigen-residuals (costly for large k).
    pub residuals: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { rule: QuadratureRule::default(), residuals: true }
    }
}

/// Per-mode spectral data.
#[derive(Clone, Debug)]
pub struct SpectralRecord {
    pub k: usize,
    pub ik: CouplingIndex,
    pub iak: CouplingIndex,
    /// Left end of the control region used for `I_(a,k)`.
    pub a: f64,
    pub psi_star: ModeFunction,
    pub psi: ModeFunction,
    /// Present when the coupling avoids the control region.
    pub tau: Option<TauG>,
    /// Max over the control region of `|psi*_k - tau_k phi_k - g_k|`.
    pub tau_reconstruction_error: Option<f64>,
    pub residual_adjoint: f64,
    pub residual_direct: f64,
    pub psi_star_at_pi: f64,
    pub psi_at_pi: f64,
    /// `<psi*_k, phi_k>` by an independent adaptive quadrature.
    pub orthogonality: f64,
}

impl SpectralRecord {
    pub fn alpha_star(&self) -> f64 {
        self.psi_star.alpha()
    }
    pub fn alpha(&self) -> f64 {
        self.psi.alpha()
    }
    pub fn eigen_residual(&self) -> f64 {
        self.residual_adjoint.max(self.residual_direct)
    }
}

pub fn build_record(
    cp: &Arc<CouplingPair>,
    omega: &Interval,
    k: usize,
    opts: &SpectralOptions,
) -> Result<SpectralRecord> {
    let rule = &opts.rule;
    let ik = compute_ik(cp, k, rule)?;
    let iak = compute_iak(cp, omega.lo(), k, rule)?;
    let psi_star = ModeFunction::new(cp.clone(), k, Kernel::Adjoint, ik.value);
    let psi = ModeFunction::new(cp.clone(), k, Kernel::Direct, ik.value);
    let (tau, tau_reconstruction_error) = if cp.avoids(omega) {
        let t = compute_tau_g(cp, omega, k, rule)?;
        let n = 256;
        let err = (0..=n)
            .map(|i| {
                let x = omega.lo() + omega.len() * i as f64 / n as f64;
                (psi_star.value(x) - t.reconstruct(x)).abs()
            })
            .fold(0.0, f64::max);
        (Some(t), Some(err))
    } else {
        (None, None)
    };
    let (residual_adjoint, residual_direct) =
        if opts.residuals { (psi_star.eigen_residual(), psi.eigen_residual()) } else { (f64::NAN, f64::NAN) };
    let phi = SineMode::new_unchecked(k);
    let orthogonality = integrate_fn(
        |x| psi_star.value(x) * phi.value(x),
        0.0,
        PI,
        &cp.breaks(),
        2.0 * k as f64 + cp.q_frequency(),
        rule,
    )?
    .value;
    Ok(SpectralRecord {
        k,
        ik,
        iak,
        a: omega.lo(),
        psi_star_at_pi: psi_star.value(PI),
        psi_at_pi: psi.value(PI),
        psi_star,
        psi,
        tau,
        tau_reconstruction_error,
        residual_adjoint,
        residual_direct,
        orthogonality,
    })
}

/// Records for modes `1..=k_max`, built in parallel.
pub fn build_records(
    cp: &Arc<CouplingPair>,
    omega: &Interval,
    k_max: usize,
    opts: &SpectralOptions,
) -> Result<Vec<SpectralRecord>> {
    (1..=k_max).into_par_iter().map(|k| build_record(cp, omega, k, opts)).collect()
}

/// Default sampling grid: 4097 uniform points on [0, pi] plus breakpoints.
pub fn default_grid(cp: &CouplingPair) -> Vec<f64> {
    let n = 4096;
    let mut g: Vec<f64> = (0..=n).map(|i| PI * i as f64 / n as f64).collect();
    g.extend(cp.breaks());
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Scaled sizes of `alpha*_k`, `sup|psi*_k|` and `sup|psi*_k'|`.
///
/// With `p = 0` the kernel is bounded and the sizes decay like `1/k`,
/// `1/k` and `1`. A nonzero p contributes `p phi_k' = O(k)` to the kernel,
/// which lifts every size by one power of k. The sequences below are
/// multiplied by the matching power so that they stay bounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeBounds {
    /// Power of k removed from `alpha*` and `sup|psi*|` (1 when p = 0, else 0).
    pub decay_power: i32,
    pub k: Vec<usize>,
    pub alpha_scaled: Vec<f64>,
    pub sup_scaled: Vec<f64>,
    pub deriv_scaled: Vec<f64>,
    /// Maxima of the three sequences over `k <= 10`.
    pub constants: [f64; 3],
    /// Every later entry stays below three times the fitted constant.
    pub holds: bool,
}

pub fn size_bounds(records: &[SpectralRecord], grid: &[f64]) -> SizeBounds {
    let decay_power = match records.first() {
        Some(r) if !r.psi_star.coupling().p().is_zero() => 0,
        _ => 1,
    };
    let rows: Vec<(usize, f64, f64, f64)> = records
        .par_iter()
        .map(|r| {
            let w = (r.k as f64).powi(decay_power);
            let (mut s, mut d) = (0.0f64, 0.0f64);
            for &x in grid {
                s = s.max(r.psi_star.value(x).abs());
                d = d.max(r.psi_star.deriv(x).abs());
            }
            (r.k, w * r.alpha_star().abs(), w * s, w * d / r.k as f64)
        })
        .collect();
    let fit = |sel: fn(&(usize, f64, f64, f64)) -> f64| {
        rows.iter().filter(|r| r.0 <= 10).map(sel).fold(0.0, f64::max)
    };
    let constants = [fit(|r| r.1), fit(|r| r.2), fit(|r| r.3)];
    let lim = |c: f64| 3.0 * c + 1e-12;
    let holds = rows.iter().all(|r| r.1 <= lim(constants[0]) && r.2 <= lim(constants[1]) && r.3 <= lim(constants[2]));
    SizeBounds {
        decay_power,
        k: rows.iter().map(|r| r.0).collect(),
        alpha_scaled: rows.iter().map(|r| r.1).collect(),
        sup_scaled: rows.iter().map(|r| r.2).collect(),
        deriv_scaled: rows.iter().map(|r| r.3).collect(),
        constants,
        holds,
    }
}

/// Full-precision float formatting used by every CSV writer.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// One row per mode: indices, normalizations, tau and residuals.
pub fn write_csv(records: &[SpectralRecord], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "k,I_k,ln_abs_I_k,I_ak,ln_abs_I_ak,alpha_star,alpha,tau,residual_adjoint,residual_direct,psi_star_at_pi,psi_at_pi")?;
    for r in records {
        let tau = r.tau.map_or(f64::NAN, |t| t.tau);
        let cells = [
            r.ik.value,
            r.ik.ln_abs,
            r.iak.value,
            r.iak.ln_abs,
            r.alpha_star(),
            r.alpha(),
            tau,
            r.residual_adjoint,
            r.residual_direct,
            r.psi_star_at_pi,
            r.psi_at_pi,
        ];
        let row: Vec<String> = cells.iter().map(|&v| fmt17(v)).collect();
        writeln!(out, "{},{}", r.k, row.join(","))?;
    }
    Ok(())
}
