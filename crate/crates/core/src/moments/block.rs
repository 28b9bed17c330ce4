//! Per-mode moment blocks `A1 V1 + A2 V2 = F` and their case analysis.

use serde::{Deserialize, Serialize};

use super::shapes::ShapeFunctions;
use crate::error::{Error, Result};
use crate::spectral::CouplingIndex;

/// Which indices vanish at a mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaClass {
    /// Both `I_k` and `I_(a,k)` nonzero.
    Both,
    /// Only `I_(a,k)` vanishes.
    IkOnly,
    /// Only `I_k` vanishes.
    IakOnly,
}

/// Solution branch; cases 1, 2 and 4 share the triangular solve, cases 3
/// and 5 invert `A1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
}

impl Branch {
    pub fn number(self) -> usize {
        self as usize + 1
    }
}

/// Branch selection parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub horizon: f64,
    /// Estimated minimal time.
    pub t0_hat: f64,
    pub epsilon: f64,
    pub k_eps: usize,
    /// Threshold below which a quadrature index counts as zero.
    pub zero_eps: f64,
    /// Relative floor for `|det A1|` against the product of its row norms.
    pub det_tol: f64,
}

impl SolverParams {
    /// `epsilon = (T - T0)/8` clamped to `(0, T/8]`, and the smallest
    /// `k_eps` past which every computed mode satisfies
    /// `min(-ln|I_(a,k)|, -ln|I_k|) < k^2 (T0 + epsilon)`.
    pub fn from_indices(horizon: f64, t0_hat: f64, ik: &[CouplingIndex], iak: &[CouplingIndex], zero_eps: f64) -> Self {
        let cap = horizon / 8.0;
        let epsilon = if t0_hat.is_finite() { ((horizon - t0_hat) / 8.0).clamp(cap * 1e-3, cap) } else { cap };
        let t0 = if t0_hat.is_finite() { t0_hat } else { 0.0 };
        let k_eps = (1..=ik.len())
            .rev()
            .find(|&k| {
                let worst = (-ik[k - 1].ln_abs).min(-iak[k - 1].ln_abs);
                !(worst < (k * k) as f64 * (t0 + epsilon))
            })
            .unwrap_or(0);
        SolverParams { horizon, t0_hat, epsilon, k_eps, zero_eps, det_tol: 1e-13 }
    }
}

/// One mode of the moment problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBlock {
    pub k: usize,
    pub a1: [[f64; 2]; 2],
    pub a2: [[f64; 2]; 2],
    pub f: [f64; 2],
    pub ik: f64,
    pub iak: f64,
    pub lambda: LambdaClass,
    pub branch: Branch,
}

/// Builds the block at mode `k` from the shape tables, the indices and the
/// initial coefficients `(y_(1,k), y_(2,k))`.
pub fn assemble_block(
    k: usize,
    shapes: &ShapeFunctions,
    ik: &CouplingIndex,
    iak: &CouplingIndex,
    y0: (f64, f64),
    params: &SolverParams,
) -> Result<MomentBlock> {
    if k == 0 || k > shapes.k_max() {
        return Err(Error::InvalidInput(format!("mode {k} outside the shape tables")));
    }
    let i = k - 1;
    let (ik_zero, iak_zero) = (ik.is_zero(params.zero_eps), iak.is_zero(params.zero_eps));
    let lambda = match (ik_zero, iak_zero) {
        (true, true) => return Err(Error::BothIndicesZero { k }),
        (false, false) => LambdaClass::Both,
        (false, true) => LambdaClass::IkOnly,
        (true, false) => LambdaClass::IakOnly,
    };
    let ikv = if ik_zero { 0.0 } else { ik.value };
    let t = params.horizon;
    let decay = (-((k * k) as f64) * t).exp();
    let (fs, ft) = ([shapes.sine[0][i], shapes.sine[1][i]], [shapes.adjoint[0][i], shapes.adjoint[1][i]]);
    let threshold = (k * k) as f64 * (params.t0_hat.max(0.0) + 2.0 * params.epsilon);
    let branch = match lambda {
        LambdaClass::Both if k <= params.k_eps => Branch::Case1,
        LambdaClass::Both if -ik.ln_abs <= threshold => Branch::Case2,
        LambdaClass::Both => Branch::Case3,
        LambdaClass::IkOnly => Branch::Case4,
        LambdaClass::IakOnly => Branch::Case5,
    };
    Ok(MomentBlock {
        k,
        a1: [[ft[0], ft[1]], [fs[0], fs[1]]],
        a2: [[-ikv * fs[0], -ikv * fs[1]], [0.0, 0.0]],
        f: [-decay * (y0.0 - t * ikv * y0.1), -decay * y0.1],
        ik: ikv,
        iak: if iak_zero { 0.0 } else { iak.value },
        lambda,
        branch,
    })
}

/// Coefficients `v^(i)_(j,k)` stored as `v[j-1][i-1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficients {
    pub v: [[f64; 2]; 2],
    /// `|A1 V1 + A2 V2 - F| / (1 + |F|)`.
    pub residual: f64,
}

pub fn block_residual(block: &MomentBlock, v: &[[f64; 2]; 2]) -> f64 {
    let mut worst: f64 = 0.0;
    let fnorm = block.f[0].hypot(block.f[1]);
    for r in 0..2 {
        let lhs: f64 = (0..2).map(|c| block.a1[r][c] * v[0][c] + block.a2[r][c] * v[1][c]).sum();
        worst = worst.max((lhs - block.f[r]).abs());
    }
    worst / (1.0 + fnorm)
}

pub fn solve_block(block: &MomentBlock, params: &SolverParams) -> Result<ModeCoefficients> {
    let mut v = [[0.0; 2]; 2];
    if block.f != [0.0, 0.0] {
        match block.branch {
            Branch::Case1 | Branch::Case2 | Branch::Case4 => {
                let (fs, ft) = (block.a1[1][0], block.a1[0][0]);
                if fs == 0.0 {
                    return Err(Error::InvalidInput(format!("f_k^(1) vanishes at mode {}", block.k)));
                }
                // Second row first, then the first row for the t-weighted term.
                v[0][0] = block.f[1] / fs;
                v[1][0] = (ft * v[0][0] - block.f[0]) / (block.ik * fs);
            }
            Branch::Case3 | Branch::Case5 => {
                let a = block.a1;
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                let scale = a[0][0].hypot(a[0][1]) * a[1][0].hypot(a[1][1]);
                if !(det.abs() > params.det_tol * scale) {
                    return Err(Error::SingularA1 { k: block.k, det, iak: block.iak });
                }
                // The A2 term is inactive since V2 = 0 on these branches.
                v[0][0] = (a[1][1] * block.f[0] - a[0][1] * block.f[1]) / det;
                v[0][1] = (a[0][0] * block.f[1] - a[1][0] * block.f[0]) / det;
            }
        }
    }
    Ok(ModeCoefficients { v, residual: block_residual(block, &v) })
}
