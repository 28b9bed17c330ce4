//! Piecewise-polynomial functions on (0, pi), Dirichlet sine modes and
//! Gauss-Legendre quadrature aligned to breakpoints.

mod approx;
mod piecewise;
mod poly;
mod quadrature;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use approx::{chebyshev_fit, Approximant};
pub use piecewise::{PiecewisePoly, PiecewiseSpec, SegmentSpec};
pub use poly::Poly;
pub use quadrature::{gauss_legendre, integrate, integrate_fn, Estimate, PanelGrid, QuadratureRule};

pub const PI: f64 = std::f64::consts::PI;

/// Snap values within this distance of 0 or pi onto the endpoint.
const ENDPOINT_SNAP: f64 = 1e-9;

pub(crate) fn snap_endpoint(x: f64) -> f64 {
    if (x - PI).abs() < ENDPOINT_SNAP {
        PI
    } else if x.abs() < ENDPOINT_SNAP {
        0.0
    } else {
        x
    }
}

/// Open subinterval `(lo, hi)` of `[0, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawInterval {
    lo: f64,
    hi: f64,
}

impl TryFrom<RawInterval> for Interval {
    type Error = Error;
    fn try_from(r: RawInterval) -> Result<Self> {
        Interval::new(r.lo, r.hi)
    }
}

impl From<Interval> for RawInterval {
    fn from(iv: Interval) -> Self {
        RawInterval { lo: iv.lo, hi: iv.hi }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let (lo, hi) = (snap_endpoint(lo), snap_endpoint(hi));
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= PI) {
            return Err(Error::InvalidInput(format!(
                "interval ({lo}, {hi}) must satisfy 0 <= lo < hi <= pi"
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// The whole domain `(0, pi)`.
    pub fn full() -> Self {
        Interval { lo: 0.0, hi: PI }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Closed-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// True when the open intervals share a set of positive length.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo.max(other.lo) < self.hi.min(other.hi)
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Regularity class of a piecewise function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Smoothness {
    Linfty,
    W1infty,
    W2infty,
}

impl Smoothness {
    /// Class after one differentiation, if any.
    pub fn decrement(self) -> Option<Smoothness> {
        match self {
            Smoothness::Linfty => None,
            Smoothness::W1infty => Some(Smoothness::Linfty),
            Smoothness::W2infty => Some(Smoothness::W1infty),
        }
    }
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Smoothness::Linfty => "Linfty",
            Smoothness::W1infty => "W1infty",
            Smoothness::W2infty => "W2infty",
        };
        f.write_str(s)
    }
}

/// Normalized Dirichlet eigenfunction `sqrt(2/pi) sin(k x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SineMode(usize);

pub const SINE_NORM: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

impl SineMode {
    pub(crate) fn new_unchecked(k: usize) -> Self {
        debug_assert!(k >= 1);
        SineMode(k)
    }
    pub fn index(&self) -> usize {
        self.0
    }
    pub fn value(&self, x: f64) -> f64 {
        SINE_NORM * (self.0 as f64 * x).sin()
    }
    pub fn deriv(&self, x: f64) -> f64 {
        let k = self.0 as f64;
        SINE_NORM * k * (k * x).cos()
    }
    pub fn second_deriv(&self, x: f64) -> f64 {
        let k = self.0 as f64;
        -k * k * self.value(x)
    }
}

pub fn eigenfunction(k: usize) -> Result<SineMode> {
    if k == 0 {
        return Err(Error::InvalidInput("mode index must be >= 1".into()));
    }
    Ok(SineMode(k))
}
