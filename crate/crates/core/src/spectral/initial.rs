use serde::{Deserialize, Serialize};

use super::SpectralRecord;
use crate::error::Result;
use crate::funcspace::{PanelGrid, PiecewisePoly, SineMode, PI};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitude {
    pub k: usize,
    pub amp: f64,
}

/// One component of an initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Zero,
    /// Finite sine expansion `sum amp phi_k`.
    Modes { modes: Vec<ModeAmplitude> },
    Piecewise { f: PiecewisePoly },
}

impl Profile {
    pub fn mode(k: usize) -> Self {
        Profile::Modes { modes: vec![ModeAmplitude { k, amp: 1.0 }] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Modes { modes } => modes.iter().map(|m| m.amp * SineMode::new_unchecked(m.k.max(1)).value(x)).sum(),
            Profile::Piecewise { f } => f.eval(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Modes { modes } => modes.iter().all(|m| m.amp == 0.0),
            Profile::Piecewise { f } => f.is_zero(),
        }
    }

    fn frequency(&self) -> f64 {
        match self {
            Profile::Modes { modes } => modes.iter().map(|m| m.k as f64).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match self {
            Profile::Piecewise { f } => f.breaks().to_vec(),
            _ => Vec::new(),
        }
    }

    /// Sine coefficients `<profile, phi_k>` for `k <= n`.
    pub fn sine_coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Profile::Zero => vec![0.0; n],
            Profile::Modes { modes } => {
                let mut c = vec![0.0; n];
                for m in modes {
                    if m.k >= 1 && m.k <= n {
                        c[m.k - 1] += m.amp;
                    }
                }
                c
            }
            Profile::Piecewise { f } => {
                let grid = PanelGrid::new(0.0, PI, f.breaks(), (PI / 64.0).min(2.0 * PI / n as f64), 16);
                let vals: Vec<f64> = grid.nodes.iter().map(|&x| f.eval(x)).collect();
                (1..=n)
                    .map(|k| {
                        let phi = SineMode::new_unchecked(k);
                        grid.nodes.iter().zip(&grid.weights).zip(&vals).map(|((&x, &w), &v)| w * v * phi.value(x)).sum()
                    })
                    .collect()
            }
        }
    }
}

/// Initial state `(y1, y2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialData {
    #[serde(default)]
    pub first: Profile,
    #[serde(default)]
    pub second: Profile,
}

impl InitialData {
    pub fn is_zero(&self) -> bool {
        self.first.is_zero() && self.second.is_zero()
    }

    /// L2 norm of the pair, by quadrature.
    pub fn norm(&self) -> f64 {
        let mut b = self.first.breaks();
        b.extend(self.second.breaks());
        let f = self.first.frequency().max(self.second.frequency());
        let grid = PanelGrid::new(0.0, PI, &b, (PI / 64.0).min(2.0 * PI / (f + 1.0)), 16);
        grid.integrate(|x| self.first.eval(x).powi(2) + self.second.eval(x).powi(2)).sqrt()
    }
}

/// Coefficients `y_(i,k) = <y0, Phi*_(i,k)>` for `i = 1, 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCoefficients {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// L2 distance between y0 and its truncated biorthogonal expansion.
    pub reconstruction_error: f64,
}

impl InitialCoefficients {
    pub fn zeros(n: usize) -> Self {
        InitialCoefficients { first: vec![0.0; n], second: vec![0.0; n], reconstruction_error: 0.0 }
    }
}

pub fn expand_initial_data(records: &[SpectralRecord], y0: &InitialData) -> Result<InitialCoefficients> {
    let n = records.len();
    if n == 0 || y0.is_zero() {
        let mut c = InitialCoefficients::zeros(n);
        c.reconstruction_error = y0.norm();
        return Ok(c);
    }
    let cp = records[0].psi_star.coupling();
    let mut breaks = cp.breaks();
    breaks.extend(y0.first.breaks());
    breaks.extend(y0.second.breaks());
    let kmax = records.iter().map(|r| r.k).max().unwrap_or(1) as f64;
    let freq = 2.0 * kmax + cp.q_frequency() + y0.first.frequency().max(y0.second.frequency());
    let grid = PanelGrid::new(0.0, PI, &breaks, (PI / 64.0).min(2.0 * PI / freq), 16);
    let y1: Vec<f64> = grid.nodes.iter().map(|&x| y0.first.eval(x)).collect();
    let y2: Vec<f64> = grid.nodes.iter().map(|&x| y0.second.eval(x)).collect();

    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut rec1 = vec![0.0; grid.nodes.len()];
    let mut rec2 = vec![0.0; grid.nodes.len()];
    for r in records {
        let phi = SineMode::new_unchecked(r.k);
        let (mut a, mut b) = (0.0, 0.0);
        let ph: Vec<f64> = grid.nodes.iter().map(|&x| phi.value(x)).collect();
        let ps: Vec<f64> = grid.nodes.iter().map(|&x| r.psi_star.value(x)).collect();
        for i in 0..grid.nodes.len() {
            let w = grid.weights[i];
            a += w * (y1[i] * ps[i] + y2[i] * ph[i]);
            b += w * y1[i] * ph[i];
        }
        // Phi_(1,k) = (0, phi_k), Phi_(2,k) = (phi_k, psi_k).
        for (i, &x) in grid.nodes.iter().enumerate() {
            rec1[i] += b * ph[i];
            rec2[i] += a * ph[i] + b * r.psi.value(x);
        }
        first.push(a);
        second.push(b);
    }
    let err2: f64 = (0..grid.nodes.len())
        .map(|i| grid.weights[i] * ((y1[i] - rec1[i]).powi(2) + (y2[i] - rec2[i]).powi(2)))
        .sum();
    Ok(InitialCoefficients { first, second, reconstruction_error: err2.sqrt() })
}
