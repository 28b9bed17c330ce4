//! The moment problem for distributed and boundary null control.
//!
//! Distributed controls take the separated form
//! `v(x, t) = f1(x) v1(T - t) + f2(x) v2(T - t)` with
//! `v_i = sum_k v^(i)_(1,k) q_(1,k) + v^(i)_(2,k) q_(2,k)`; boundary
//! controls are `u(t) = sum_k u_(1,k) q_(1,k)(T - t) + u_(2,k) q_(2,k)(T - t)`.

mod block;
mod shapes;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use block::{assemble_block, block_residual, solve_block, Branch, LambdaClass, ModeCoefficients, MomentBlock, SolverParams};
pub use shapes::{build_shapes, quartic_bump, ShapeFunctions};

use crate::biortho::{BiorthoFamily, ExpSeries};
use crate::error::{Error, Result};
use crate::funcspace::{PanelGrid, SineMode, PI, SINE_NORM};
use crate::spectral::{fmt17, InitialCoefficients, InitialData, SpectralRecord};

/// Adjoint modes as seen by an `n`-mode sine-Galerkin model: the sine
/// coefficients `<psi*_k, phi_m>` for `m <= n`. Synthesizing with the
/// projected tables makes the moment identities exact for that model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointProjection {
    pub n: usize,
    /// `beta[k - 1][m - 1] = <psi*_k, phi_m>`.
    pub beta: Vec<Vec<f64>>,
}

impl AdjointProjection {
    pub fn new(records: &[SpectralRecord], n: usize) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::InvalidInput("need at least one spectral record".into()));
        };
        if n == 0 {
            return Err(Error::InvalidInput("projection size must be positive".into()));
        }
        let cp = first.psi_star.coupling();
        let k_max = records.iter().map(|r| r.k).max().unwrap_or(1);
        let freq = (k_max + n) as f64 + cp.q_frequency();
        let grid = PanelGrid::new(0.0, PI, &cp.breaks(), (PI / 64.0).min(2.0 * PI / freq), 20);
        let modes: Vec<Vec<f64>> =
            (1..=n).map(|m| grid.nodes.iter().map(|&x| SineMode::new_unchecked(m).value(x)).collect()).collect();
        let beta = records
            .par_iter()
            .map(|r| {
                let psi: Vec<f64> = grid.nodes.iter().map(|&x| r.psi_star.value(x)).collect();
                modes.iter().map(|phi| (0..psi.len()).map(|j| grid.weights[j] * psi[j] * phi[j]).sum()).collect()
            })
            .collect();
        Ok(AdjointProjection { n, beta })
    }

    /// Shapes whose adjoint tables use the projected `psi*_k`.
    pub fn shapes(&self, shapes: &ShapeFunctions) -> Result<ShapeFunctions> {
        if shapes.k_max() < self.n || self.beta.len() < shapes.k_max() {
            return Err(Error::InvalidInput(format!("projection of size {} needs shape and spectral tables of at least that size", self.n)));
        }
        let mut out = shapes.clone();
        for i in 0..2 {
            for (k, b) in self.beta.iter().take(shapes.k_max()).enumerate() {
                out.adjoint[i][k] = b.iter().zip(&shapes.sine[i]).map(|(x, y)| x * y).sum();
            }
        }
        Ok(out)
    }

    /// Initial pairings of the projected state `P_n y0`.
    pub fn initial(&self, y0: &InitialData) -> InitialCoefficients {
        let y1 = y0.first.sine_coefficients(self.n);
        let y2 = y0.second.sine_coefficients(self.n.max(self.beta.len()));
        let first = self.beta.iter().enumerate().map(|(k, b)| b.iter().zip(&y1).map(|(x, y)| x * y).sum::<f64>() + if k < self.n { y2[k] } else { 0.0 }).collect();
        let second = (0..self.beta.len()).map(|k| if k < self.n { y1[k] } else { 0.0 }).collect();
        InitialCoefficients { first, second, reconstruction_error: f64::NAN }
    }
}

/// Least-squares fit `ln term_k ~ intercept + rate k^2` over nonzero terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// `max_j |coefficient_(j,k)| ||q_(j,k)||` per mode.
    pub terms: Vec<f64>,
    /// Bound on the omitted tail `sum_(k > K) e^(intercept + rate k^2)`.
    pub tail_bound: f64,
}

impl DecayFit {
    fn new(terms: Vec<f64>) -> Self {
        let pts: Vec<(f64, f64)> = terms
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > 0.0)
            .map(|(i, &t)| (((i + 1) * (i + 1)) as f64, t.ln()))
            .collect();
        let (rate, intercept) = match pts.len() {
            0 => (f64::NEG_INFINITY, f64::NEG_INFINITY),
            1 => (f64::NEG_INFINITY, pts[0].1),
            _ => {
                let n = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                let rate = sxy / sxx;
                // Shift the line up so it dominates every computed term.
                let c = pts.iter().map(|p| p.1 - rate * p.0).fold(f64::NEG_INFINITY, f64::max);
                (rate, c)
            }
        };
        let k0 = terms.len();
        let tail_bound = if rate < 0.0 {
            (k0 + 1..k0 + 200).map(|k| (intercept + rate * (k * k) as f64).exp()).sum()
        } else if rate.is_finite() {
            f64::INFINITY
        } else {
            0.0
        };
        DecayFit { rate, intercept, terms, tail_bound }
    }

    fn check(&self) -> Result<()> {
        let nonzero = self.terms.iter().filter(|&&t| t > 0.0).count();
        if nonzero >= 3 && self.rate >= 0.0 {
            return Err(Error::DivergentSeriesFit { rate: self.rate });
        }
        Ok(())
    }
}

/// Per-mode record of the distributed solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub block: MomentBlock,
    pub coefficients: ModeCoefficients,
}

/// A synthesized distributed control.
#[derive(Clone, Debug)]
pub struct ControlSolution {
    pub params: SolverParams,
    pub modes: Vec<ModeSolution>,
    pub shapes: Arc<ShapeFunctions>,
    pub family: Arc<BiorthoFamily>,
    /// Time profiles `v1`, `v2` as functions of `T - t`.
    pub profiles: [ExpSeries; 2],
    pub decay: DecayFit,
}

/// Solves every block up to the family size and assembles the series.
pub fn solve_distributed(
    shapes: Arc<ShapeFunctions>,
    family: Arc<BiorthoFamily>,
    records: &[SpectralRecord],
    y0: &InitialCoefficients,
    params: &SolverParams,
) -> Result<ControlSolution> {
    let k_max = family.k_max();
    if records.len() < k_max || shapes.k_max() < k_max || y0.first.len() < k_max {
        return Err(Error::InvalidInput(format!("tables shorter than the family size {k_max}")));
    }
    if (family.horizon() - params.horizon).abs() > 1e-14 * params.horizon {
        return Err(Error::InvalidInput("family horizon differs from the solver horizon".into()));
    }
    let modes: Vec<ModeSolution> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let r = &records[k - 1];
            let block = assemble_block(k, &shapes, &r.ik, &r.iak, (y0.first[k - 1], y0.second[k - 1]), params)?;
            let coefficients = solve_block(&block, params)?;
            Ok(ModeSolution { block, coefficients })
        })
        .collect::<Result<_>>()?;

    let mut weights: [Vec<(usize, usize, f64)>; 2] = [Vec::new(), Vec::new()];
    let mut terms = Vec::with_capacity(k_max);
    for m in &modes {
        let k = m.block.k;
        let mut worst: f64 = 0.0;
        for j in 1..=2 {
            for i in 1..=2 {
                let c = m.coefficients.v[j - 1][i - 1];
                weights[i - 1].push((j, k, c));
                worst = worst.max(c.abs() * family.norm(j, k));
            }
        }
        terms.push(worst);
    }
    let decay = DecayFit::new(terms);
    decay.check()?;
    let profiles = [family.combine(&weights[0])?, family.combine(&weights[1])?];
    Ok(ControlSolution { params: *params, modes, shapes, family, profiles, decay })
}

impl ControlSolution {
    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    /// `v_i(s)` for `s` in `[0, T]`.
    pub fn profile(&self, i: usize, s: f64) -> Result<f64> {
        let t = self.horizon();
        if !(-1e-12..=t + 1e-12).contains(&s) {
            return Err(Error::OutOfDomain { t: s, horizon: t });
        }
        self.profiles[i - 1].eval(s.clamp(0.0, t))
    }

    /// Projection `int_omega v(., t) phi_k` for `k = 1..=n`, from the shape
    /// sine tables extended by quadrature beyond the solved modes.
    pub fn mode_loads(&self, n: usize) -> [Vec<f64>; 2] {
        self.shapes.sine_loads(n)
    }

    /// Per-mode CSV: Lambda class, branch, coefficients and block residuals.
    pub fn write_modes_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "k,lambda,branch,v1_1k,v1_2k,v2_1k,v2_2k,block_residual")?;
        for m in &self.modes {
            let v = m.coefficients.v;
            writeln!(
                w,
                "{},{:?},case{},{},{},{},{},{}",
                m.block.k,
                m.block.lambda,
                m.block.branch.number(),
                fmt17(v[0][0]),
                fmt17(v[1][0]),
                fmt17(v[0][1]),
                fmt17(v[1][1]),
                fmt17(m.coefficients.residual)
            )?;
        }
        Ok(())
    }
}

/// Pointwise distributed control `f1(x) v1(T - t) + f2(x) v2(T - t)`.
pub fn assemble_distributed(sol: &ControlSolution, x: f64, t: f64) -> Result<f64> {
    let s = sol.horizon() - t;
    let (a, b) = (sol.shapes.eval(1, x), sol.shapes.eval(2, x));
    if a == 0.0 && b == 0.0 {
        if !(-1e-12..=sol.horizon() + 1e-12).contains(&t) {
            return Err(Error::OutOfDomain { t, horizon: sol.horizon() });
        }
        return Ok(0.0);
    }
    Ok(a * sol.profile(1, s)? + b * sol.profile(2, s)?)
}

/// Residuals of the moment identities
/// `int int v 1_omega B* theta_(i,k) = -<y0, theta_(i,k)(0)>`, with the
/// time integrals taken by quadrature of the evaluated profiles.
pub fn moment_residuals(sol: &ControlSolution, y0: &InitialCoefficients) -> Result<Vec<[f64; 2]>> {
    let t = sol.horizon();
    let grid = PanelGrid::new(0.0, t, &[], t / 64.0, 16);
    let v1 = sol.profiles[0].eval_many(&grid.nodes)?;
    let v2 = sol.profiles[1].eval_many(&grid.nodes)?;
    let sh = &sol.shapes;
    Ok(sol
        .modes
        .iter()
        .map(|m| {
            let k = m.block.k;
            let i = k - 1;
            let kk = (k * k) as f64;
            // s = T - t is the time to the horizon.
            let mom = |v: &[f64], n: i32| -> f64 {
                grid.nodes.iter().zip(&grid.weights).zip(v).map(|((&s, &w), &vv)| w * vv * s.powi(n) * (-kk * s).exp()).sum()
            };
            let (m10, m11, m20, m21) = (mom(&v1, 0), mom(&v1, 1), mom(&v2, 0), mom(&v2, 1));
            let ik = m.block.ik;
            let decay = (-kk * t).exp();
            let lhs1 = sh.adjoint[0][i] * m10 + sh.adjoint[1][i] * m20 - ik * (sh.sine[0][i] * m11 + sh.sine[1][i] * m21);
            let rhs1 = -decay * (y0.first[i] - t * ik * y0.second[i]);
            let lhs2 = sh.sine[0][i] * m10 + sh.sine[1][i] * m20;
            let rhs2 = -decay * y0.second[i];
            [(lhs1 - rhs1).abs(), (lhs2 - rhs2).abs()]
        })
        .collect())
}

/// Boundary moment coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoefficients {
    pub horizon: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

/// `u_(1,k)`, `u_(2,k)` from the pairings `first = <z1, psi*_k> + <z2, phi_k>`
/// and `second = <z1, phi_k>`.
pub fn solve_boundary(records: &[SpectralRecord], z0: &InitialCoefficients, horizon: f64, k_max: usize, zero_eps: f64) -> Result<BoundaryCoefficients> {
    if records.len() < k_max || z0.first.len() < k_max {
        return Err(Error::InvalidInput(format!("tables shorter than K = {k_max}")));
    }
    let mut u1 = Vec::with_capacity(k_max);
    let mut u2 = Vec::with_capacity(k_max);
    for r in &records[..k_max] {
        let k = r.k;
        let i = k - 1;
        if r.ik.is_zero(zero_eps) {
            return Err(Error::ZeroIk { k });
        }
        let dphi = SINE_NORM * k as f64;
        let decay = (-((k * k) as f64) * horizon).exp();
        let (first, second) = (z0.first[i], z0.second[i]);
        u1.push(-decay * second / dphi);
        let shift = r.ik.value * horizon + r.psi_star.deriv(0.0) / dphi;
        u2.push(decay / (r.ik.value * dphi) * (first - shift * second));
    }
    Ok(BoundaryCoefficients { horizon, u1, u2 })
}

/// A synthesized boundary control.
#[derive(Clone, Debug)]
pub struct BoundaryControl {
    pub coefficients: BoundaryCoefficients,
    pub family: Arc<BiorthoFamily>,
    /// `u` as a function of `T - t`.
    pub profile: ExpSeries,
    pub decay: DecayFit,
}

impl BoundaryControl {
    pub fn new(coefficients: BoundaryCoefficients, family: Arc<BiorthoFamily>) -> Result<Self> {
        let k_max = coefficients.u1.len();
        if family.k_max() < k_max {
            return Err(Error::InvalidInput(format!("family has {} modes, need {k_max}", family.k_max())));
        }
        let mut weights = Vec::with_capacity(2 * k_max);
        let mut terms = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let (a, b) = (coefficients.u1[k - 1], coefficients.u2[k - 1]);
            weights.push((1, k, a));
            weights.push((2, k, b));
            terms.push((a.abs() * family.norm(1, k)).max(b.abs() * family.norm(2, k)));
        }
        let decay = DecayFit::new(terms);
        decay.check()?;
        let profile = family.combine(&weights)?;
        Ok(BoundaryControl { coefficients, family, profile, decay })
    }

    pub fn horizon(&self) -> f64 {
        self.coefficients.horizon
    }

    /// `||u||_(L2(0,T))` by quadrature.
    pub fn l2_norm(&self) -> Result<f64> {
        let t = self.horizon();
        let grid = PanelGrid::new(0.0, t, &[], t / 64.0, 16);
        let v = self.profile.eval_many(&grid.nodes)?;
        Ok(grid.sum(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt())
    }
}

/// `u(t) = sum_k u_(1,k) q_(1,k)(T - t) + u_(2,k) q_(2,k)(T - t)`.
pub fn assemble_boundary(ctrl: &BoundaryControl, t: f64) -> Result<f64> {
    let h = ctrl.horizon();
    if !(-1e-12..=h + 1e-12).contains(&t) {
        return Err(Error::OutOfDomain { t, horizon: h });
    }
    ctrl.profile.eval((h - t).clamp(0.0, h))
}
