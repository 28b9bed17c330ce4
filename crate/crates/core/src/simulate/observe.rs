//! Observability quotients along single adjoint modes.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::biortho::moment_f64;
use crate::error::{Error, Result};
use crate::funcspace::{Interval, PanelGrid, QuadratureRule, SineMode, PI};
use crate::spectral::{compute_tau_g, fmt17, CouplingPair, ModeFunction, Kernel};

/// `D1 = ||theta(0)||^2` and `D2 = int_0^T int_omega |B* theta|^2` for
/// `theta0 = Phi*_(1,k) - tau_k Phi*_(2,k)`, kept as logarithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientRow {
    pub k: usize,
    pub tau: f64,
    pub ln_d1: f64,
    pub ln_d2: f64,
    /// `ln(D1 / D2)`; `+inf` when the observed trace vanishes.
    pub ln_quotient: f64,
    /// Relative change of D2 between two quadrature orders.
    pub d2_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub horizon: f64,
    pub rows: Vec<QuotientRow>,
    /// Largest quotient, a lower bound on any observability constant.
    pub ln_c_obs_lower: f64,
    /// Some mode has an identically vanishing observed trace.
    pub degenerate: bool,
}

impl ObservabilityReport {
    pub fn row(&self, k: usize) -> Option<&QuotientRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// `quotient(k_hi) / quotient(k_lo)`.
    pub fn growth(&self, k_lo: usize, k_hi: usize) -> Option<f64> {
        Some((self.row(k_hi)?.ln_quotient - self.row(k_lo)?.ln_quotient).exp())
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "k,tau,ln_D1,ln_D2,ln_quotient,D2_rel_error")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.k, fmt17(r.tau), fmt17(r.ln_d1), fmt17(r.ln_d2), fmt17(r.ln_quotient), fmt17(r.d2_error))?;
        }
        Ok(())
    }
}

/// Spatial integrals over omega of products of `g_I`, `g_A` and `phi_k`.
struct Overlaps {
    ii: f64,
    ia: f64,
    aa: f64,
    i_phi: f64,
    a_phi: f64,
    phi_phi: f64,
}

fn overlaps(tg: &crate::spectral::TauG, omega: &Interval, order: usize) -> Overlaps {
    let k = tg.k;
    let grid = PanelGrid::new(omega.lo(), omega.hi(), &[], (omega.len() / 8.0).min(PI / (2.0 * k as f64)), order);
    let phi = SineMode::new_unchecked(k);
    let mut o = Overlaps { ii: 0.0, ia: 0.0, aa: 0.0, i_phi: 0.0, a_phi: 0.0, phi_phi: 0.0 };
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        let (gi, ga, ph) = (tg.g_ik_part(x), tg.g_iak_part(x), phi.value(x));
        o.ii += w * gi * gi;
        o.ia += w * gi * ga;
        o.aa += w * ga * ga;
        o.i_phi += w * gi * ph;
        o.a_phi += w * ga * ph;
        o.phi_phi += w * ph * ph;
    }
    o
}

fn ln_d2(o: &Overlaps, k: usize, horizon: f64, ik: (f64, f64), iak: (f64, f64)) -> f64 {
    // Each index as (sign, ln|.|); factor out the larger magnitude.
    let ln_s = ik.1.max(iak.1);
    if ln_s == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let ri = ik.0 * (ik.1 - ln_s).exp();
    let ra = iak.0 * (iak.1 - ln_s).exp();
    let s = 2.0 * (k * k) as f64;
    let m = [moment_f64(0, s, horizon), moment_f64(1, s, horizon), moment_f64(2, s, horizon)];
    let inner = ri * ri * (o.ii * m[0] - 2.0 * o.i_phi * m[1] + o.phi_phi * m[2])
        + 2.0 * ri * ra * (o.ia * m[0] - o.a_phi * m[1])
        + ra * ra * o.aa * m[0];
    2.0 * ln_s + inner.max(0.0).ln()
}

/// Quotients `D1/D2` for the listed modes; the coupling must avoid omega.
pub fn observability_quotient(
    cp: &Arc<CouplingPair>,
    omega: &Interval,
    horizon: f64,
    modes: &[usize],
    rule: &QuadratureRule,
) -> Result<ObservabilityReport> {
    if !cp.avoids(omega) {
        return Err(Error::SupportOverlap { support: format!("{:?}", cp.support_p().iter().chain(cp.support_q()).collect::<Vec<_>>()), omega: omega.to_string() });
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let mut rows = Vec::with_capacity(modes.len());
    for &k in modes {
        let tg = compute_tau_g(cp, omega, k, rule)?;
        let psi = ModeFunction::new(cp.clone(), k, Kernel::Adjoint, tg.ik.value);
        let grid = PanelGrid::new(0.0, PI, &cp.breaks(), (PI / 64.0).min(PI / (2.0 * k as f64 + cp.q_frequency())), 16);
        let psi_norm2 = grid.integrate(|x| psi.value(x).powi(2));
        // b - T I a with a = 1, b = -tau.
        let shifted = -tg.tau - horizon * tg.ik.value;
        let ln_d1 = -2.0 * (k * k) as f64 * horizon + (psi_norm2 + shifted * shifted + 1.0).ln();
        let sign = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
        let ik = (sign(tg.ik.value), tg.ik.ln_abs);
        let iak = (sign(tg.iak.value), tg.iak.ln_abs);
        let fine = ln_d2(&overlaps(&tg, omega, 20), k, horizon, ik, iak);
        let coarse = ln_d2(&overlaps(&tg, omega, 12), k, horizon, ik, iak);
        let d2_error = if fine.is_finite() { (coarse - fine).exp_m1().abs() } else { 0.0 };
        rows.push(QuotientRow { k, tau: tg.tau, ln_d1, ln_d2: fine, ln_quotient: ln_d1 - fine, d2_error });
    }
    let ln_c_obs_lower = rows.iter().map(|r| r.ln_quotient).fold(f64::NEG_INFINITY, f64::max);
    let degenerate = rows.iter().any(|r| r.ln_d2 == f64::NEG_INFINITY);
    Ok(ObservabilityReport { horizon, rows, ln_c_obs_lower, degenerate })
}
