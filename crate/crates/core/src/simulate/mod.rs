//! Spectral-Galerkin simulation, dual solutions and controllability
//! certificates.

mod dual;
mod galerkin;
mod observe;

use nalgebra::DVector;

pub use dual::{dual_closed_form, initial_pairing, verify_boundary, DualMode};
pub use galerkin::{
    dual_solve, forward_distributed, verify_null, Free, FnSource, GalerkinModel, NullReport, Source, StateTrajectory,
    SteppingOptions,
};
pub use observe::{observability_quotient, ObservabilityReport, QuotientRow};

use crate::error::{Error, Result};
use crate::biortho::ExpSeries;
use crate::moments::ControlSolution;

/// A separated distributed control `f1(x) v1(T - t) + f2(x) v2(T - t)` as
/// a Galerkin source, given the profiles and the shape sine loads.
pub struct DistributedSource {
    horizon: f64,
    profiles: [ExpSeries; 2],
    loads: [Vec<f64>; 2],
}

impl DistributedSource {
    pub fn new(horizon: f64, profiles: [ExpSeries; 2], loads: [Vec<f64>; 2]) -> Self {
        DistributedSource { horizon, profiles, loads }
    }

    /// Source of a synthesized control for an `n`-mode model.
    pub fn from_solution(solution: &ControlSolution, n: usize) -> Self {
        Self::new(solution.horizon(), solution.profiles.clone(), solution.mode_loads(n))
    }
}

impl Source for DistributedSource {
    fn loads(&self, times: &[f64], n: usize) -> Result<Vec<DVector<f64>>> {
        if self.loads[0].len() < n || self.loads[1].len() < n {
            return Err(Error::InvalidInput(format!("control loads cover {} modes, model has {n}", self.loads[0].len())));
        }
        let t = self.horizon;
        let s: Vec<f64> = times.iter().map(|&x| (t - x).clamp(0.0, t)).collect();
        let v1 = self.profiles[0].eval_many(&s)?;
        let v2 = self.profiles[1].eval_many(&s)?;
        let [f1, f2] = &self.loads;
        Ok((0..times.len()).map(|j| DVector::from_fn(n, |k, _| f1[k] * v1[j] + f2[k] * v2[j])).collect())
    }
}

/// Discrete duality defect
/// `int_0^T <v(t), theta1(t)> dt - (<y(T), theta0> - <y(0), theta(0)>)`
/// for a forward and a dual trajectory, with the time integral taken by
/// composite Simpson on the dual grid.
pub fn duality_defect(forward: &StateTrajectory, dual: &StateTrajectory, source: &dyn Source) -> Result<f64> {
    let n = forward.c1.nrows();
    let steps = dual.times.len() - 1;
    if !steps.is_multiple_of(2) || dual.c1.nrows() != n {
        return Err(Error::InvalidInput("dual grid must have an even step count and the forward size".into()));
    }
    let h = dual.times[1] - dual.times[0];
    let loads = source.loads(&dual.times, n)?;
    let integral: f64 = (0..=steps)
        .map(|j| {
            let w = if j == 0 || j == steps { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            w * loads[j].dot(&dual.c1.column(j))
        })
        .sum::<f64>()
        * h
        / 3.0;
    let last = forward.times.len() - 1;
    let y_t = forward.c1.column(last).dot(&dual.c1.column(steps)) + forward.c2.column(last).dot(&dual.c2.column(steps));
    let y_0 = forward.c1.column(0).dot(&dual.c1.column(0)) + forward.c2.column(0).dot(&dual.c2.column(0));
    Ok(integral - (y_t - y_0))
}
