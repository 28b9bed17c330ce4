//! Sine-Galerkin model of the cascade and its exponential integrator.
//!
//! In the sine basis the system reads
//! `c1' = -D c1 + v`, `c2' = -D c2 - M c1` with `D = diag(k^2)`. The
//! homogeneous part is integrated exactly; only the source is sampled,
//! at Gauss-Legendre nodes inside each step.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{gauss_legendre, PanelGrid, SineMode, PI};
use crate::spectral::CouplingPair;

const SOURCE_ORDER: usize = 8;

#[derive(Clone, Debug)]
pub struct GalerkinModel {
    /// `M[k][m] = int (p phi_m' + q phi_m) phi_k`.
    coupling: DMatrix<f64>,
}

impl GalerkinModel {
    pub fn new(cp: &CouplingPair, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("Galerkin size must be positive".into()));
        }
        if cp.is_zero() {
            return Ok(Self::uncoupled(n));
        }
        let freq = 2.0 * n as f64 + cp.q_frequency();
        let grid = PanelGrid::new(0.0, PI, &cp.breaks(), (PI / 64.0).min(2.0 * PI / freq), 20);
        let p: Vec<f64> = grid.nodes.iter().map(|&x| cp.p().eval(x)).collect();
        let q: Vec<f64> = grid.nodes.iter().map(|&x| cp.q(x)).collect();
        let modes: Vec<(Vec<f64>, Vec<f64>)> = (1..=n)
            .map(|k| {
                let phi = SineMode::new_unchecked(k);
                (grid.nodes.iter().map(|&x| phi.value(x)).collect(), grid.nodes.iter().map(|&x| phi.deriv(x)).collect())
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                (0..n)
                    .map(|m| {
                        let (vk, _) = &modes[k];
                        let (vm, dm) = &modes[m];
                        (0..grid.nodes.len()).map(|j| grid.weights[j] * (p[j] * dm[j] + q[j] * vm[j]) * vk[j]).sum()
                    })
                    .collect()
            })
            .collect();
        Ok(GalerkinModel { coupling: DMatrix::from_fn(n, n, |k, m| rows[k][m]) })
    }

    pub fn uncoupled(n: usize) -> Self {
        GalerkinModel { coupling: DMatrix::zeros(n, n) }
    }

    pub fn from_matrix(coupling: DMatrix<f64>) -> Result<Self> {
        if !coupling.is_square() || coupling.nrows() == 0 {
            return Err(Error::InvalidInput("coupling matrix must be square and nonempty".into()));
        }
        Ok(GalerkinModel { coupling })
    }

    pub fn n(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn transposed(&self) -> Self {
        GalerkinModel { coupling: self.coupling.transpose() }
    }
}

/// Mode loads `v_k(t) = int_omega v(., t) phi_k` at a batch of times.
pub trait Source: Sync {
    fn loads(&self, times: &[f64], n: usize) -> Result<Vec<DVector<f64>>>;
}

/// No control.
pub struct Free;

impl Source for Free {
    fn loads(&self, times: &[f64], n: usize) -> Result<Vec<DVector<f64>>> {
        Ok(vec![DVector::zeros(n); times.len()])
    }
}

/// Loads given by a closure.
pub struct FnSource<F: Fn(f64) -> DVector<f64> + Sync>(pub F);

impl<F: Fn(f64) -> DVector<f64> + Sync> Source for FnSource<F> {
    fn loads(&self, times: &[f64], n: usize) -> Result<Vec<DVector<f64>>> {
        Ok(times
            .par_iter()
            .map(|&t| {
                let v = (self.0)(t);
                DVector::from_fn(n, |k, _| v.get(k).copied().unwrap_or(0.0))
            })
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    /// Column `j` holds the sine coefficients at `times[j]`.
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub norms: Vec<f64>,
    /// Final-state change in the last step-doubling comparison.
    pub doubling_change: f64,
    /// Round-off level of the accepted run, relative to its peak norm.
    pub noise_floor: f64,
}

impl StateTrajectory {
    pub fn terminal(&self) -> (DVector<f64>, DVector<f64>) {
        let j = self.times.len() - 1;
        (self.c1.column(j).into_owned(), self.c2.column(j).into_owned())
    }

    pub fn terminal_norm(&self) -> f64 {
        *self.norms.last().expect("trajectory is nonempty")
    }
}

/// `int_0^s e^(-a (s - r)) e^(-b r) dr` without cancellation.
fn phi(a: f64, b: f64, s: f64) -> f64 {
    let d = a - b;
    if (d * s).abs() < 1e-3 {
        let x = d * s;
        // expm1(x)/x by its series.
        let ratio = 1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0;
        (-a * s).exp() * s * ratio
    } else {
        ((-b * s).exp() - (-a * s).exp()) / d
    }
}

struct Stepper {
    decay: DVector<f64>,
    /// Decay from each source node to the end of the step.
    node_decay: Vec<DVector<f64>>,
    drift: DMatrix<f64>,
    node_drift: Vec<DMatrix<f64>>,
    nodes: Vec<(f64, f64)>,
}

impl Stepper {
    fn new(model: &GalerkinModel, h: f64) -> Self {
        let n = model.n();
        let lam: Vec<f64> = (1..=n).map(|k| (k * k) as f64).collect();
        let nodes: Vec<(f64, f64)> = gauss_legendre(SOURCE_ORDER).iter().map(|&(x, w)| (0.5 * h * (x + 1.0), 0.5 * h * w)).collect();
        let m = model.coupling();
        let drift = DMatrix::from_fn(n, n, |k, j| m[(k, j)] * phi(lam[k], lam[j], h));
        let node_drift = nodes.iter().map(|&(s, _)| DMatrix::from_fn(n, n, |k, j| m[(k, j)] * phi(lam[k], lam[j], h - s))).collect();
        Stepper {
            decay: DVector::from_fn(n, |k, _| (-lam[k] * h).exp()),
            node_decay: nodes.iter().map(|&(s, _)| DVector::from_fn(n, |k, _| (-lam[k] * (h - s)).exp())).collect(),
            drift,
            node_drift,
            nodes,
        }
    }
}

fn integrate(
    model: &GalerkinModel,
    y0: (&DVector<f64>, &DVector<f64>),
    source: &dyn Source,
    horizon: f64,
    steps: usize,
) -> Result<StateTrajectory> {
    let n = model.n();
    let h = horizon / steps as f64;
    let st = Stepper::new(model, h);
    let sample_times: Vec<f64> = (0..steps).flat_map(|i| st.nodes.iter().map(move |&(s, _)| i as f64 * h + s)).collect();
    let loads = source.loads(&sample_times, n)?;
    let mut c1 = DMatrix::zeros(n, steps + 1);
    let mut c2 = DMatrix::zeros(n, steps + 1);
    c1.set_column(0, y0.0);
    c2.set_column(0, y0.1);
    let mut a = y0.0.clone();
    let mut b = y0.1.clone();
    for i in 0..steps {
        let mut na = a.component_mul(&st.decay);
        let mut nb = b.component_mul(&st.decay) - &st.drift * &a;
        for (j, &(_, w)) in st.nodes.iter().enumerate() {
            let v = &loads[i * st.nodes.len() + j];
            na += w * v.component_mul(&st.node_decay[j]);
            nb -= w * (&st.node_drift[j] * v);
        }
        a = na;
        b = nb;
        c1.set_column(i + 1, &a);
        c2.set_column(i + 1, &b);
    }
    let norms = (0..=steps).map(|j| (c1.column(j).norm_squared() + c2.column(j).norm_squared()).sqrt()).collect();
    let times = (0..=steps).map(|j| j as f64 * h).collect();
    Ok(StateTrajectory { times, c1, c2, norms, doubling_change: f64::NAN, noise_floor: f64::NAN })
}

/// Step-doubling controls: start size, growth cap and acceptance threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteppingOptions {
    pub steps: usize,
    pub max_steps: usize,
    pub tol: f64,
}

impl Default for SteppingOptions {
    fn default() -> Self {
        SteppingOptions { steps: 2048, max_steps: 32768, tol: 1e-6 }
    }
}

/// Accumulated rounding of a run: a random walk of one ulp of the peak
/// norm per step, with a safety factor. Large controls that cancel at the
/// horizon cannot be resolved below this level in double precision.
fn noise_floor(traj: &StateTrajectory) -> f64 {
    let peak = traj.norms.iter().copied().fold(0.0, f64::max);
    let steps = (traj.times.len() - 1) as f64;
    8.0 * f64::EPSILON * peak * steps.sqrt()
}

fn converged(
    model: &GalerkinModel,
    y0: (&DVector<f64>, &DVector<f64>),
    source: &dyn Source,
    horizon: f64,
    opts: &SteppingOptions,
) -> Result<StateTrajectory> {
    if opts.steps < 64 {
        return Err(Error::InvalidInput(format!("need at least 64 steps, got {}", opts.steps)));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if y0.0.len() != model.n() || y0.1.len() != model.n() {
        return Err(Error::InvalidInput(format!("initial data has {} modes, model has {}", y0.0.len(), model.n())));
    }
    let scale = (y0.0.norm_squared() + y0.1.norm_squared()).sqrt().max(1.0);
    let mut steps = opts.steps;
    let mut coarse = integrate(model, y0, source, horizon, steps)?;
    loop {
        let fine = integrate(model, y0, source, horizon, 2 * steps)?;
        let (a0, b0) = coarse.terminal();
        let (a1, b1) = fine.terminal();
        let change = ((a1 - a0).norm_squared() + (b1 - b0).norm_squared()).sqrt() / scale;
        let noise_floor = noise_floor(&fine) / scale;
        if change <= opts.tol.max(noise_floor) {
            return Ok(StateTrajectory { doubling_change: change, noise_floor, ..fine });
        }
        steps *= 2;
        if 2 * steps > opts.max_steps {
            return Err(Error::NonConvergedTimeStepping { change, steps: 2 * steps });
        }
        coarse = fine;
    }
}

/// Forward solve of the controlled cascade from sine coefficients `y0`.
pub fn forward_distributed(
    model: &GalerkinModel,
    y0: (&DVector<f64>, &DVector<f64>),
    source: &dyn Source,
    horizon: f64,
    opts: &SteppingOptions,
) -> Result<StateTrajectory> {
    converged(model, y0, source, horizon, opts)
}

/// Backward solve of the dual system from `theta(T) = theta0`; the result
/// is indexed by forward time, so column 0 holds `theta(0)`.
pub fn dual_solve(
    model: &GalerkinModel,
    theta0: (&DVector<f64>, &DVector<f64>),
    horizon: f64,
    opts: &SteppingOptions,
) -> Result<StateTrajectory> {
    // In reversed time the second component is the autonomous one and the
    // first is driven through M^T.
    let tr = converged(&model.transposed(), (theta0.1, theta0.0), &Free, horizon, opts)?;
    let cols = tr.times.len();
    let rev = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), cols, |i, j| m[(i, cols - 1 - j)]);
    Ok(StateTrajectory {
        times: tr.times.clone(),
        c1: rev(&tr.c2),
        c2: rev(&tr.c1),
        norms: tr.norms.iter().rev().copied().collect(),
        doubling_change: tr.doubling_change,
        noise_floor: tr.noise_floor,
    })
}

/// Terminal-state report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullReport {
    /// `||y(T)|| / ||y0||`, zero when both vanish.
    pub ratio: f64,
    pub terminal_norm: f64,
    pub initial_norm: f64,
    /// `(|c1_k(T)|, |c2_k(T)|)` per mode.
    pub per_mode: Vec<(f64, f64)>,
}

pub fn verify_null(traj: &StateTrajectory, y0_norm: f64) -> NullReport {
    let (a, b) = traj.terminal();
    let terminal_norm = traj.terminal_norm();
    let ratio = if y0_norm == 0.0 {
        if terminal_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        terminal_norm / y0_norm
    };
    NullReport { ratio, terminal_norm, initial_norm: y0_norm, per_mode: a.iter().zip(b.iter()).map(|(x, y)| (x.abs(), y.abs())).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_matches_both_branches() {
        let (a, b) = (4.0, 4.0 + 1e-6);
        let direct = phi(a, b, 0.3);
        let far = phi(a, b + 1e-2, 0.3);
        let x = (a - b) * 0.3;
        assert!((direct - 0.3 * (-a * 0.3f64).exp() * x.exp_m1() / x).abs() < 1e-15);
        assert!((far - direct).abs() < 1e-3);
    }
}
