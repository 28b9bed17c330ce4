//! Minimal-norm biorthogonal families to `{e^(-k^2 t), t e^(-k^2 t)}` on
//! `(0, T)`.
//!
//! The Gram matrix of these exponentials is catastrophically
//! ill-conditioned, so the default path assembles, inverts and stores it in
//! multiprecision arithmetic. Acceptance is decided by the residual of the
//! stored coefficients, not by the solver.

mod big;

use std::io::Write;

use astro_float::BigFloat;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};


use crate::error::{Error, Result};
use crate::spectral::fmt17;
use big::{to_f64, Big};

/// Which arithmetic assembles and inverts the Gram matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Precision {
    Double,
    Extended { bits: usize },
}

impl Precision {
    /// Enough bits for the growth of the condition number with K.
    pub fn extended_for(k_max: usize) -> Self {
        Precision::Extended { bits: 192 + 32 * k_max }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    pub precision: Precision,
    pub tol: f64,
}

impl FamilyOptions {
    pub fn new(k_max: usize, tol: f64) -> Self {
        FamilyOptions { precision: Precision::extended_for(k_max), tol }
    }
}

/// Index of `e_(i,k)` (or `q_(i,k)`) in the flattened basis; `i` in {1, 2}.
pub fn basis_index(i: usize, k: usize) -> usize {
    2 * (k - 1) + (i - 1)
}

fn basis_mode(b: usize) -> (usize, usize) {
    (b % 2 + 1, b / 2 + 1)
}

/// `int_0^T t^n e^(-s t)` in double precision, stable for small `s T`.
pub(crate) fn moment_f64(n: usize, s: f64, horizon: f64) -> f64 {
    let x = s * horizon;
    let fact = [1.0, 1.0, 2.0][n];
    // Regularized lower incomplete gamma P(n + 1, x).
    let p = if x < 1.0 {
        let mut term = x.powi(n as i32 + 1) / (fact * (n as f64 + 1.0));
        let mut sum = term;
        for j in (n + 2)..60 {
            term *= x / j as f64;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        let mut partial = 0.0;
        let mut term = 1.0;
        for j in 0..=n {
            if j > 0 {
                term *= x / j as f64;
            }
            partial += term;
        }
        -(-x).exp_m1() - (partial - 1.0) * (-x).exp()
    };
    fact * p / s.powi(n as i32 + 1)
}

/// Gram matrix of the exponential basis in double precision.
pub fn gram_matrix(k_max: usize, horizon: f64) -> DMatrix<f64> {
    let n = 2 * k_max;
    DMatrix::from_fn(n, n, |a, b| {
        let ((i, k), (j, l)) = (basis_mode(a), basis_mode(b));
        moment_f64(i + j - 2, (k * k + l * l) as f64, horizon)
    })
}

/// `sum_k (a_k + b_k t) e^(-k^2 t)` on `[0, T]` with multiprecision
/// coefficients; the cancellation between terms is far beyond double.
#[derive(Clone, Debug)]
pub struct ExpSeries {
    horizon: f64,
    bits: usize,
    /// `(a_k, b_k)` for `k = 1..=K`.
    terms: Vec<(BigFloat, BigFloat)>,
}

impl ExpSeries {
    pub fn zero(k_max: usize, horizon: f64, bits: usize) -> Self {
        let z = Big { bits }.zero();
        ExpSeries { horizon, bits, terms: vec![(z.clone(), z); k_max] }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn k_max(&self) -> usize {
        self.terms.len()
    }

    /// Coefficients rounded to double, for display.
    pub fn coefficients_f64(&self) -> Vec<(f64, f64)> {
        self.terms.iter().map(|(a, b)| (to_f64(a), to_f64(b))).collect()
    }

    fn big(&self) -> Big {
        Big { bits: self.bits }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let m = self.big();
        let td = m.num(t);
        // e^(-(k+1)^2 t) = e^(-k^2 t) e^(-(2k+1) t), with the second factor
        // advanced by e^(-2t).
        let mut e = m.exp(&m.num(-t))?;
        let mut step = m.mul(&e, &m.mul(&e, &e));
        let shift = m.exp(&m.num(-2.0 * t))?;
        let mut s = m.zero();
        for (k, (a, b)) in self.terms.iter().enumerate() {
            if k > 0 {
                e = m.mul(&e, &step);
                step = m.mul(&step, &shift);
            }
            if a.is_zero() && b.is_zero() {
                continue;
            }
            s = m.add(&s, &m.mul(&m.add(a, &m.mul(b, &td)), &e));
        }
        Ok(to_f64(&s))
    }

    /// Values at many points, in parallel.
    pub fn eval_many(&self, ts: &[f64]) -> Result<Vec<f64>> {
        ts.par_iter().map(|&t| self.eval(t)).collect()
    }

    pub fn add_scaled(&mut self, other: &ExpSeries, w: f64) {
        let m = self.big();
        let wb = m.num(w);
        for (x, y) in self.terms.iter_mut().zip(&other.terms) {
            x.0 = m.add(&x.0, &m.mul(&y.0, &wb));
            x.1 = m.add(&x.1, &m.mul(&y.1, &wb));
        }
    }

    /// `int_0^T e^(-lambda (T - s)) series(s) ds` in closed form.
    pub fn convolve_exp(&self, lambda: f64) -> Result<f64> {
        let m = self.big();
        let t = self.horizon;
        let base = m.exp(&m.num(-lambda * t))?;
        let mut total = m.zero();
        for (k, (a, b)) in self.terms.iter().enumerate() {
            // e^(-lambda (T - s)) e^(-kk s) = e^(-lambda T) e^(-(kk - lambda) s).
            let d = ((k + 1) * (k + 1)) as f64 - lambda;
            let (m0, m1) = m.shifted_moments(d, t)?;
            total = m.add(&total, &m.add(&m.mul(a, &m0), &m.mul(b, &m1)));
        }
        Ok(to_f64(&m.mul(&base, &total)))
    }

    /// `int_0^T t^n e^(-lambda t) series(t) dt` for `n` in {0, 1}.
    pub fn moment_against(&self, n: usize, lambda: f64) -> Result<f64> {
        let m = self.big();
        let mut total = m.zero();
        for (k, (a, b)) in self.terms.iter().enumerate() {
            let s = ((k + 1) * (k + 1)) as f64 + lambda;
            let lo = m.moment(n, s, self.horizon)?;
            let hi = m.moment(n + 1, s, self.horizon)?;
            total = m.add(&total, &m.add(&m.mul(a, &lo), &m.mul(b, &hi)));
        }
        Ok(to_f64(&total))
    }
}

/// Empirical growth bound `ln ||q_(1,k)|| <= epsilon k^2 + c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub epsilon: f64,
    pub c_eps: f64,
}

#[derive(Clone, Debug)]
pub struct BiorthoFamily {
    horizon: f64,
    k_max: usize,
    precision: Precision,
    bits: usize,
    /// Column `b` holds the expansion of `q_b` over the basis.
    coefficients: Vec<Vec<BigFloat>>,
    pub gram_condition: f64,
    pub min_eigenvalue: f64,
    pub residual_matrix: DMatrix<f64>,
    pub max_residual: f64,
    /// `||q_b||_(L2(0,T))` from the diagonal of the Gram inverse.
    pub norms: Vec<f64>,
    /// Largest relative gap between `c^T G c` and the diagonal entry.
    pub norm_check: f64,
}

pub fn build_family(k_max: usize, horizon: f64, tol: f64) -> Result<BiorthoFamily> {
    build_family_with(k_max, horizon, &FamilyOptions::new(k_max, tol))
}

/// Minimal-norm biorthogonal family; fails with `IllConditioned` when the
/// stored coefficients miss the delta property by more than `tol`.
pub fn build_family_with(k_max: usize, horizon: f64, opts: &FamilyOptions) -> Result<BiorthoFamily> {
    if k_max == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("need K >= 1 and T > 0, got K = {k_max}, T = {horizon}")));
    }
    let n = 2 * k_max;
    // The reference Gram matrix is always exact to the working precision so
    // that the residual measures the stored coefficients, whatever solved them.
    let bits = match opts.precision {
        Precision::Double => 256,
        Precision::Extended { bits } => bits.max(64),
    };
    let m = Big { bits };
    let mut g = vec![Vec::with_capacity(n); n];
    for (a, row) in g.iter_mut().enumerate() {
        for b in 0..n {
            let ((i, k), (j, l)) = (basis_mode(a), basis_mode(b));
            row.push(m.moment(i + j - 2, (k * k + l * l) as f64, horizon)?);
        }
    }
    let failed = |condition: f64| Error::IllConditioned { residual: f64::INFINITY, tol: opts.tol, condition };
    let inv: Vec<Vec<BigFloat>> = match opts.precision {
        Precision::Double => {
            let g64 = gram_matrix(k_max, horizon);
            let c = g64.cholesky().ok_or_else(|| failed(f64::INFINITY))?.inverse();
            (0..n).map(|i| (0..n).map(|j| m.num(c[(i, j)])).collect()).collect()
        }
        Precision::Extended { .. } => m.spd_inverse(&g).ok_or_else(|| failed(f64::INFINITY))?,
    };

    let mut residual = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut s = if a == b { m.num(-1.0) } else { m.zero() };
            for k in 0..n {
                s = m.add(&s, &m.mul(&g[a][k], &inv[k][b]));
            }
            residual[(a, b)] = to_f64(&s);
        }
    }
    let max_residual = residual.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let g64 = DMatrix::from_fn(n, n, |i, j| to_f64(&g[i][j]));
    let c64 = DMatrix::from_fn(n, n, |i, j| to_f64(&inv[i][j]));
    let lam_max = power_iteration(&g64);
    let inv_max = power_iteration(&c64);
    let gram_condition = lam_max * inv_max;
    if !(max_residual <= opts.tol) {
        return Err(Error::IllConditioned { residual: max_residual, tol: opts.tol, condition: gram_condition });
    }

    let coefficients: Vec<Vec<BigFloat>> = (0..n).map(|b| (0..n).map(|k| inv[k][b].clone()).collect()).collect();
    let mut norms = Vec::with_capacity(n);
    let mut norm_check: f64 = 0.0;
    for (b, c) in coefficients.iter().enumerate() {
        let diag = to_f64(&inv[b][b]);
        let mut quad = m.zero();
        for i in 0..n {
            let mut gc = m.zero();
            for j in 0..n {
                gc = m.add(&gc, &m.mul(&g[i][j], &c[j]));
            }
            quad = m.add(&quad, &m.mul(&c[i], &gc));
        }
        norm_check = norm_check.max((to_f64(&quad) - diag).abs() / diag.abs());
        norms.push(diag.sqrt());
    }

    Ok(BiorthoFamily {
        horizon,
        k_max,
        precision: opts.precision,
        bits,
        coefficients,
        gram_condition,
        min_eigenvalue: 1.0 / inv_max,
        residual_matrix: residual,
        max_residual,
        norms,
        norm_check,
    })
}

fn power_iteration(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lam = 0.0;
    for _ in 0..500 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w / norm;
        let done = (norm - lam).abs() <= 1e-13 * norm;
        lam = norm;
        v = next;
        if done {
            break;
        }
    }
    lam
}

impl BiorthoFamily {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn k_max(&self) -> usize {
        self.k_max
    }
    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Expansion of `q_(j,l)` over `e_(1,1), e_(2,1), e_(1,2), ...`,
    /// rounded to double.
    pub fn coefficients_f64(&self, j: usize, l: usize) -> Vec<f64> {
        self.coefficients[basis_index(j, l)].iter().map(to_f64).collect()
    }

    pub fn norm(&self, j: usize, l: usize) -> f64 {
        self.norms[basis_index(j, l)]
    }

    fn check(&self, j: usize, l: usize) -> Result<()> {
        if !(j == 1 || j == 2) || l == 0 || l > self.k_max {
            return Err(Error::InvalidInput(format!("no family member ({j}, {l}) for K = {}", self.k_max)));
        }
        Ok(())
    }

    /// `q_(j,l)` as an exponential series.
    pub fn member(&self, j: usize, l: usize) -> Result<ExpSeries> {
        self.check(j, l)?;
        let c = &self.coefficients[basis_index(j, l)];
        let terms = (0..self.k_max).map(|k| (c[2 * k].clone(), c[2 * k + 1].clone())).collect();
        Ok(ExpSeries { horizon: self.horizon, bits: self.bits, terms })
    }

    pub fn evaluate(&self, j: usize, l: usize, t: f64) -> Result<f64> {
        if !(-1e-12..=self.horizon + 1e-12).contains(&t) {
            return Err(Error::OutOfDomain { t, horizon: self.horizon });
        }
        self.member(j, l)?.eval(t.clamp(0.0, self.horizon))
    }

    /// `sum w_(j,l) q_(j,l)` for weights given as `(j, l, w)`.
    pub fn combine(&self, weights: &[(usize, usize, f64)]) -> Result<ExpSeries> {
        let mut out = ExpSeries::zero(self.k_max, self.horizon, self.bits);
        for &(j, l, w) in weights {
            if w != 0.0 {
                out.add_scaled(&self.member(j, l)?, w);
            }
        }
        Ok(out)
    }

    /// Least-squares slope of `ln ||q_(1,k)||` against `k^2`, with the
    /// smallest constant making the bound hold on every computed mode.
    pub fn growth_fit(&self) -> GrowthFit {
        let pts: Vec<(f64, f64)> = (1..=self.k_max).map(|k| ((k * k) as f64, self.norm(1, k).ln())).collect();
        let n = pts.len() as f64;
        let epsilon = if pts.len() < 2 {
            0.0
        } else {
            let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            (sxy / sxx).max(0.0)
        };
        let c_eps = pts.iter().map(|(k2, y)| y - epsilon * k2).fold(f64::NEG_INFINITY, f64::max);
        GrowthFit { epsilon, c_eps }
    }

    /// Norms as CSV: `j,l,norm`.
    pub fn write_norms_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "j,l,norm")?;
        for l in 1..=self.k_max {
            for j in 1..=2 {
                writeln!(w, "{j},{l},{}", fmt17(self.norm(j, l)))?;
            }
        }
        Ok(())
    }

    /// Residual matrix as CSV with one row per basis function.
    pub fn write_residual_csv(&self, mut w: impl Write) -> Result<()> {
        let n = 2 * self.k_max;
        let header: Vec<String> = (0..n).map(|b| {
            let (j, l) = basis_mode(b);
            format!("q_{j}_{l}")
        }).collect();
        writeln!(w, "e,{}", header.join(","))?;
        for a in 0..n {
            let (i, k) = basis_mode(a);
            let row: Vec<String> = (0..n).map(|b| fmt17(self.residual_matrix[(a, b)])).collect();
            writeln!(w, "e_{i}_{k},{}", row.join(","))?;
        }
        Ok(())
    }
}
