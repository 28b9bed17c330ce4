//! Changes of unknown `y1 -> y1 / theta` and the coupling regularization
//! pipeline built on them.
//!
//! A change with `theta` constant outside a window inside the control
//! region maps the coupling pair to `(p theta, p theta' + q theta)` and
//! preserves null controllability in both directions.

mod fit;
mod qzero;
mod regularize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{Interval, PiecewisePoly, Poly, Smoothness, PI};
use crate::spectral::CouplingPair;

pub(crate) use fit::{assemble, fit_adaptive, jet, quintic_bridge, sampled_min, Segment};
pub use qzero::{build_theta_qzero, build_theta_qzero_with, nonvanishing_window, QzeroOptions};
pub use regularize::{
    lower_bound_exponent, regularize, regularize_with, Certification, RegularizeOptions, RegularizationTrace,
    SizingCheck, StepRecord, StepTwoBump,
};

/// Which construction produced a change of unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Qzero,
    Bump,
    Step1,
    Step2,
    Step3,
}

/// A positive multiplier `theta`, constant left and right of `window`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownChange {
    pub theta: PiecewisePoly,
    /// Construction constants: the bump weight, per-step magnitudes, or the
    /// boundary offset, depending on the provenance.
    pub kappa_values: Vec<f64>,
    pub window: Interval,
    pub provenance: Provenance,
    /// Subinterval on which the transformed q vanishes, when the change was
    /// built for that purpose.
    #[serde(default)]
    pub q_free: Option<Interval>,
}

/// Coefficients of the transformed control
/// `v_hat = zeroth * y1 + first * y1' + control * 1_omega v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlMapCoefficients {
    pub zeroth: f64,
    pub first: f64,
    pub control: f64,
}

const CONSTANCY_TOL: f64 = 1e-12;

impl UnknownChange {
    pub fn identity(window: Interval) -> Self {
        UnknownChange {
            theta: PiecewisePoly::constant(1.0),
            kappa_values: Vec::new(),
            window,
            provenance: Provenance::Qzero,
            q_free: None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.theta.pieces().iter().all(|p| p.degree() == 0 && (p.eval(0.0) - 1.0).abs() <= CONSTANCY_TOL)
    }

    /// Value left of the window.
    pub fn left_constant(&self) -> f64 {
        self.theta.eval(0.0)
    }

    /// Value right of the window.
    pub fn right_constant(&self) -> f64 {
        self.theta.eval(PI)
    }

    /// Check constancy outside the window and positivity everywhere.
    pub fn validate(&self) -> Result<()> {
        let min = sampled_min(&self.theta);
        if !(min > 0.0) {
            return Err(Error::ThetaNotPositive { min });
        }
        let (l, r) = (self.left_constant(), self.right_constant());
        for (w, p) in self.theta.breaks().windows(2).zip(self.theta.pieces()) {
            let outside = if w[1] <= self.window.lo() + 1e-12 {
                Some(l)
            } else if w[0] >= self.window.hi() - 1e-12 {
                Some(r)
            } else {
                None
            };
            if let Some(c) = outside {
                let bad = p.coeffs.iter().skip(1).any(|c| c.abs() > CONSTANCY_TOL) || (p.eval(w[0]) - c).abs() > CONSTANCY_TOL * (1.0 + c.abs());
                if bad {
                    return Err(Error::InvalidInput(format!(
                        "theta is not constant on ({}, {}) outside the window {}",
                        w[0], w[1], self.window
                    )));
                }
            }
        }
        Ok(())
    }

    /// Multiplier `1 / theta`, fitted piecewise; constant pieces stay exact.
    pub fn inverse(&self) -> Result<UnknownChange> {
        let mut segs = Vec::new();
        for (w, p) in self.theta.breaks().windows(2).zip(self.theta.pieces()) {
            if p.degree() == 0 {
                segs.push(Segment { lo: w[0], hi: w[1], poly: Poly::constant(1.0 / p.eval(w[0])) });
            } else {
                let f = |x: f64| 1.0 / p.eval(x);
                segs.extend(fit_adaptive(&f, w[0], w[1], 1e-14)?);
            }
        }
        let theta = assemble(segs, 0.0, 0.0, Smoothness::W2infty)?;
        Ok(UnknownChange {
            theta,
            kappa_values: self.kappa_values.iter().map(|k| -k).collect(),
            window: self.window,
            provenance: self.provenance,
            q_free: None,
        })
    }

    /// Product of two changes; the window is the hull of both windows.
    pub fn compose(&self, other: &UnknownChange) -> UnknownChange {
        let lo = self.window.lo().min(other.window.lo());
        let hi = self.window.hi().max(other.window.hi());
        UnknownChange {
            theta: self.theta.mul(&other.theta),
            kappa_values: self.kappa_values.iter().chain(&other.kappa_values).copied().collect(),
            window: Interval::new(lo, hi).expect("ordered window"),
            provenance: other.provenance,
            q_free: None,
        }
    }

    /// Coefficients turning a control of the original system into one of
    /// the transformed system; the first two vanish off the window.
    pub fn control_map(&self, x: f64) -> ControlMapCoefficients {
        let [t, d1, d2] = jet(&self.theta, x, false);
        let inv = 1.0 / t;
        let inv_d1 = -d1 * inv * inv;
        let inv_d2 = -d2 * inv * inv + 2.0 * d1 * d1 * inv * inv * inv;
        ControlMapCoefficients { zeroth: -inv_d2, first: -2.0 * inv_d1, control: inv }
    }
}

/// Transformed pair `(p theta, p theta' + q theta)`.
pub fn apply_change(cp: &CouplingPair, ch: &UnknownChange) -> Result<CouplingPair> {
    ch.validate()?;
    if ch.is_identity() {
        return Ok(cp.clone());
    }
    let dtheta = ch.theta.derivative()?;
    let p_hat = cp.p().mul(&ch.theta);
    let q_hat = cp.p().mul(&dtheta).add(&cp.q_poly().mul(&ch.theta));
    let series = match cp.series() {
        None => None,
        Some(s) => {
            let cut = s.extent.length();
            let left = ch.left_constant();
            let constant_on_support = ch.window.lo() >= cut - 1e-12 || (ch.window.hi() <= cut && (left - ch.right_constant()).abs() <= CONSTANCY_TOL);
            if !constant_on_support {
                return Err(Error::InvalidInput(format!(
                    "theta varies on the cosine-series support (0, {cut}); window {}",
                    ch.window
                )));
            }
            let c = if ch.window.lo() >= cut - 1e-12 { left } else { ch.right_constant() };
            Some(s.scale(c))
        }
    };
    CouplingPair::with_series(p_hat, q_hat, series)
}

/// `sin^2(pi (x - lo) / len)` on `window`, zero elsewhere, as a certified
/// piecewise polynomial; returns the function and its sup-error.
pub fn squared_sine_bump(window: Interval) -> Result<(PiecewisePoly, f64)> {
    let (lo, len) = (window.lo(), window.len());
    let f = move |x: f64| (PI * (x - lo) / len).sin().powi(2);
    let segs = fit_adaptive(&f, lo, window.hi(), 1e-13)?;
    let mut err: f64 = 0.0;
    for s in &segs {
        for i in 0..=64 {
            let x = s.lo + (s.hi - s.lo) * i as f64 / 64.0;
            err = err.max((s.poly.eval(x) - f(x)).abs());
        }
    }
    Ok((assemble(segs, 0.0, 0.0, Smoothness::W2infty)?, err))
}

/// `theta = 1 + kappa * bump` on `window`.
pub fn bump_change(window: Interval, kappa: f64, provenance: Provenance) -> Result<UnknownChange> {
    let (bump, _) = squared_sine_bump(window)?;
    let theta = PiecewisePoly::constant(1.0).add(&bump.scale(kappa)).with_smoothness(Smoothness::W2infty)?;
    Ok(UnknownChange { theta, kappa_values: vec![kappa], window, provenance, q_free: None })
}

/// Closed form of `(1/2) int_lo^hi bump' phi_k^2` for the squared-sine bump.
pub fn jk_closed_form(lo: f64, hi: f64, k: usize) -> Result<f64> {
    let len = hi - lo;
    if !(len > 0.0) || k == 0 {
        return Err(Error::InvalidInput(format!("need lo < hi and k >= 1, got ({lo}, {hi}), k = {k}")));
    }
    let w = 2.0 * PI / len;
    let kk = 2.0 * k as f64;
    if (kk - w).abs() < 1e-8 {
        return Err(Error::ResonantMode { k, len });
    }
    let kf = k as f64;
    Ok((w / len) / ((kk + w) * (kk - w)) * (kf * (hi + lo)).sin() * (kf * len).sin())
}

/// Quadratic-irrational window endpoints `n l < (n + 1) l` inside an interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllChoice {
    pub n: usize,
    /// `l = (num / den) sqrt 2`.
    pub num: u64,
    pub den: u64,
    pub ell: f64,
    pub lo: f64,
    pub hi: f64,
    /// `min_(j <= 200) j |sin(j l)|`.
    pub sin_gap: f64,
}

const PI_OVER_J_LIMIT: f64 = 1e6;
const PI_OVER_J_GAP: f64 = 1e-9;
const SIN_GAP_RANGE: usize = 200;

/// Smallest `n` with `a / n < b / (n + 1)` and the first `l = r sqrt 2`
/// (rational `r` by increasing denominator) strictly inside that gap and
/// away from every `pi / j`.
pub fn select_ell(a: f64, b: f64) -> Result<EllChoice> {
    if !(0.0 < a && a < b) {
        return Err(Error::InvalidInput(format!("select_ell needs 0 < a < b, got ({a}, {b})")));
    }
    // a / n < b / (n + 1) exactly when n > a / (b - a).
    let mut n = (a / (b - a)).floor().max(0.0) as usize + 1;
    while a * (n as f64 + 1.0) >= b * n as f64 {
        n += 1;
    }
    let (lo, hi) = (a / n as f64, b / (n as f64 + 1.0));
    let s2 = std::f64::consts::SQRT_2;
    for den in 1u64..=1_000_000 {
        let first = ((lo / s2) * den as f64).floor() as u64;
        for num in first..=first + 2 + ((hi - lo) / s2 * den as f64) as u64 {
            let ell = num as f64 / den as f64 * s2;
            if !(ell > lo && ell < hi) || gcd(num, den) != 1 {
                continue;
            }
            if near_pi_over_j(ell) {
                continue;
            }
            return Ok(EllChoice { n, num, den, ell, lo: n as f64 * ell, hi: (n + 1) as f64 * ell, sin_gap: sin_gap(ell) });
        }
    }
    unreachable!("rationals are dense")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn near_pi_over_j(ell: f64) -> bool {
    let j = PI / ell;
    [j.floor(), j.ceil()].iter().any(|&j| (1.0..=PI_OVER_J_LIMIT).contains(&j) && (ell - PI / j).abs() < PI_OVER_J_GAP)
}

/// `min_(j <= 200) j |sin(j l)|`, the empirical Diophantine constant.
pub fn sin_gap(ell: f64) -> f64 {
    (1..=SIN_GAP_RANGE).map(|j| j as f64 * (j as f64 * ell).sin().abs()).fold(f64::INFINITY, f64::min)
}

const KAPPA_STEPS_PER_UNIT: f64 = 64.0;

/// Smallest grid value `kappa > 0` with `|u_k + kappa| >= 1/k^2` for every
/// listed mode and a tail margin `|tail + kappa| >= 2 / K^2`.
pub fn choose_kappa(u: &[f64], tail_limit: f64) -> Result<f64> {
    let k_max = u.len().max(1) as f64;
    let reach = u.iter().chain(std::iter::once(&tail_limit)).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut range = 2.0 * reach + 4.0;
    for _attempt in 0..2 {
        let steps = (range * KAPPA_STEPS_PER_UNIT).ceil() as usize;
        for j in 1..=steps {
            let kappa = j as f64 / KAPPA_STEPS_PER_UNIT;
            let modes_ok = u.iter().enumerate().all(|(i, &v)| (v + kappa).abs() >= 1.0 / ((i + 1) as f64).powi(2));
            if modes_ok && (tail_limit + kappa).abs() >= 2.0 / (k_max * k_max) {
                return Ok(kappa);
            }
        }
        range *= 4.0;
    }
    Err(Error::ScanExhausted { lo: 1.0 / KAPPA_STEPS_PER_UNIT, hi: range / 4.0 })
}
