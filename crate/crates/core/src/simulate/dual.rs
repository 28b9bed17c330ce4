//! Closed-form dual solutions and the boundary duality certificate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{PanelGrid, SineMode, SINE_NORM};
use crate::spectral::{InitialCoefficients, SpectralRecord};

/// `theta_(i,k)` started from `Phi*_(i,k)` at time T:
/// `theta_(1,k) = e^(-k^2 (T-t)) (Phi*_1 - (T-t) I_k Phi*_2)`,
/// `theta_(2,k) = e^(-k^2 (T-t)) Phi*_2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualMode {
    pub i: usize,
    pub k: usize,
    pub ik: f64,
    pub horizon: f64,
}

impl DualMode {
    pub fn new(record: &SpectralRecord, i: usize, horizon: f64) -> Result<Self> {
        if !(i == 1 || i == 2) {
            return Err(Error::InvalidInput(format!("dual index must be 1 or 2, got {i}")));
        }
        Ok(DualMode { i, k: record.k, ik: record.ik.value, horizon })
    }

    /// Weights of `(Phi*_(1,k), Phi*_(2,k))` at time t.
    pub fn weights(&self, t: f64) -> [f64; 2] {
        let s = self.horizon - t;
        let e = (-((self.k * self.k) as f64) * s).exp();
        match self.i {
            1 => [e, -s * self.ik * e],
            _ => [0.0, e],
        }
    }

    /// State pair at `(x, t)`, with `Phi*_1 = (psi*_k, phi_k)` and `Phi*_2 = (phi_k, 0)`.
    pub fn eval(&self, record: &SpectralRecord, x: f64, t: f64) -> (f64, f64) {
        let [w1, w2] = self.weights(t);
        let phi = SineMode::new_unchecked(self.k).value(x);
        (w1 * record.psi_star.value(x) + w2 * phi, w1 * phi)
    }

    /// `d/dx` of the first component at `x = 0`.
    pub fn trace(&self, record: &SpectralRecord, t: f64) -> f64 {
        let [w1, w2] = self.weights(t);
        w1 * record.psi_star.deriv(0.0) + w2 * SINE_NORM * self.k as f64
    }
}

pub fn dual_closed_form(record: &SpectralRecord, i: usize, horizon: f64, x: f64, t: f64) -> Result<(f64, f64)> {
    Ok(DualMode::new(record, i, horizon)?.eval(record, x, t))
}

/// `<z0, theta_(i,k)(0)>` from the pairings `first = <z0, Phi*_1>` and
/// `second = <z0, Phi*_2>`.
pub fn initial_pairing(mode: &DualMode, z0: &InitialCoefficients) -> f64 {
    let [w1, w2] = mode.weights(0.0);
    let j = mode.k - 1;
    w1 * z0.first[j] + w2 * z0.second[j]
}

/// Residuals `|int u d_x theta_(i,k)(0, t) dt + <z0, theta_(i,k)(0)>|`
/// for `i = 1, 2` and `k <= K`. `u` maps a batch of times to control values.
pub fn verify_boundary(
    z0: &InitialCoefficients,
    u: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    records: &[SpectralRecord],
    horizon: f64,
    k_max: usize,
) -> Result<Vec<[f64; 2]>> {
    if records.len() < k_max || z0.first.len() < k_max {
        return Err(Error::InvalidInput(format!("tables shorter than K = {k_max}")));
    }
    let grid = PanelGrid::new(0.0, horizon, &[], horizon / 128.0, 16);
    let values = u(&grid.nodes)?;
    records[..k_max]
        .iter()
        .map(|r| {
            let mut out = [0.0; 2];
            for (i, o) in out.iter_mut().enumerate() {
                let mode = DualMode::new(r, i + 1, horizon)?;
                let lhs: f64 = grid.nodes.iter().zip(&grid.weights).zip(&values).map(|((&t, &w), &v)| w * v * mode.trace(r, t)).sum();
                *o = (lhs + initial_pairing(&mode, z0)).abs();
            }
            Ok(out)
        })
        .collect()
}
