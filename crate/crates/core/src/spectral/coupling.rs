use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{integrate_fn, Interval, PiecewisePoly, QuadratureRule, Smoothness, PI};

/// Extent `(0, L)` of a cosine series term of q.
///
/// Only `L = pi` and `L = pi/2` keep the modes `cos(2 m x)` orthogonal
/// against `sin^2(k x)`, which is what makes the indices closed-form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesExtent {
    Full,
    Half,
}

impl SeriesExtent {
    pub fn length(self) -> f64 {
        match self {
            SeriesExtent::Full => PI,
            SeriesExtent::Half => 0.5 * PI,
        }
    }
}

/// Coefficient `sign * exp(ln_abs)` of `cos(2 m x)`, kept in log form so
/// that very small coefficients keep their exact logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineTerm {
    pub m: usize,
    pub negative: bool,
    pub ln_abs: f64,
}

impl CosineTerm {
    pub fn from_value(m: usize, c: f64) -> Self {
        CosineTerm { m, negative: c < 0.0, ln_abs: c.abs().ln() }
    }
    pub fn value(&self) -> f64 {
        let v = self.ln_abs.exp();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

/// `1_(0,L)(x) * sum_m c_m cos(2 m x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineSeries {
    pub extent: SeriesExtent,
    pub terms: Vec<CosineTerm>,
}

impl CosineSeries {
    /// Every coefficient multiplied by `s`, staying in log form.
    pub fn scale(&self, s: f64) -> CosineSeries {
        let terms = self
            .terms
            .iter()
            .map(|t| CosineTerm { m: t.m, negative: t.negative ^ (s < 0.0), ln_abs: t.ln_abs + s.abs().ln() })
            .collect();
        CosineSeries { extent: self.extent, terms }
    }

    pub fn new(extent: SeriesExtent, terms: Vec<CosineTerm>) -> Result<Self> {
        if terms.iter().any(|t| t.m == 0 || t.ln_abs.is_nan()) {
            return Err(Error::InvalidInput("cosine terms need m >= 1 and a valid coefficient".into()));
        }
        Ok(CosineSeries { extent, terms })
    }

    /// Series whose coupling index is exactly `exp(-k^2 tau)` for `k <= modes`.
    pub fn exponential_profile(extent: SeriesExtent, tau: f64, modes: usize) -> Self {
        let scale = 2.0 * PI / extent.length();
        let terms = (1..=modes)
            .map(|m| CosineTerm { m, negative: true, ln_abs: scale.ln() - (m * m) as f64 * tau })
            .collect();
        CosineSeries { extent, terms }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x > self.extent.length() {
            return 0.0;
        }
        self.terms.iter().map(|t| t.value() * (2.0 * t.m as f64 * x).cos()).sum()
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| 2.0 * t.m as f64).fold(0.0, f64::max)
    }

    pub fn abs_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.ln_abs.exp()).sum()
    }

    fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.ln_abs == f64::NEG_INFINITY)
    }

    /// `int_0^a series * phi_k^2` in closed form.
    fn index(&self, a: f64, k: usize) -> CouplingIndex {
        let len = self.extent.length();
        if a >= len {
            // Only the m = k term survives: -c_k L / (2 pi).
            return match self.terms.iter().find(|t| t.m == k) {
                Some(t) => CouplingIndex::from_log(t.negative, t.ln_abs + (len / (2.0 * PI)).ln()),
                None => CouplingIndex::exact(0.0),
            };
        }
        let kf = k as f64;
        let sinc = |w: f64| if w == 0.0 { a } else { (w * a).sin() / w };
        let v: f64 = self
            .terms
            .iter()
            .map(|t| {
                let m = t.m as f64;
                let inner = sinc(2.0 * m) - 0.5 * (sinc(2.0 * (m - kf)) + sinc(2.0 * (m + kf)));
                t.value() * inner / PI
            })
            .sum();
        CouplingIndex::approximate(v, 0.0)
    }

    /// `(1/pi) int_0^a series`.
    fn mean(&self, a: f64) -> f64 {
        let b = a.min(self.extent.length());
        self.terms.iter().map(|t| t.value() * (2.0 * t.m as f64 * b).sin() / (2.0 * t.m as f64)).sum::<f64>() / PI
    }
}

/// A coupling index `I_k` or `I_(a,k)` with an accurate logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingIndex {
    pub value: f64,
    /// `ln |value|`, exact even when `value` underflows.
    pub ln_abs: f64,
    /// Quadrature error estimate.
    pub error: f64,
    /// Evaluated in closed form, so a nonzero value is certified nonzero.
    #[serde(default)]
    pub exact: bool,
}

impl CouplingIndex {
    pub fn exact(value: f64) -> Self {
        CouplingIndex { value, ln_abs: value.abs().ln(), error: 0.0, exact: true }
    }

    pub fn approximate(value: f64, error: f64) -> Self {
        CouplingIndex { value, ln_abs: value.abs().ln(), error, exact: false }
    }

    fn from_log(positive: bool, ln_abs: f64) -> Self {
        let v = ln_abs.exp();
        CouplingIndex { value: if positive { v } else { -v }, ln_abs, error: 0.0, exact: true }
    }

    fn add(self, other: CouplingIndex) -> Self {
        if other.value == 0.0 && other.ln_abs == f64::NEG_INFINITY {
            return CouplingIndex { error: self.error + other.error, ..self };
        }
        if self.value == 0.0 && self.ln_abs == f64::NEG_INFINITY {
            return CouplingIndex { error: self.error + other.error, ..other };
        }
        let value = self.value + other.value;
        CouplingIndex { value, ln_abs: value.abs().ln(), error: self.error + other.error, exact: self.exact && other.exact }
    }

    /// Zero test: closed-form values are zero only when exactly zero,
    /// quadrature values when below the threshold `eps`.
    pub fn is_zero(&self, eps: f64) -> bool {
        if self.exact {
            self.ln_abs == f64::NEG_INFINITY
        } else {
            self.value.abs() <= eps
        }
    }
}

/// Coefficients `p` (at least W1infty) and `q` (bounded) of the coupling
/// term `p d/dx + q`, where `q` may carry an extra cosine series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingSpec", into = "CouplingSpec")]
pub struct CouplingPair {
    p: PiecewisePoly,
    dp: PiecewisePoly,
    q: PiecewisePoly,
    series: Option<CosineSeries>,
    support_p: Vec<Interval>,
    support_q: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub p: PiecewisePoly,
    pub q: PiecewisePoly,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_series: Option<CosineSeries>,
}

impl TryFrom<CouplingSpec> for CouplingPair {
    type Error = Error;
    fn try_from(s: CouplingSpec) -> Result<Self> {
        CouplingPair::with_series(s.p, s.q, s.q_series)
    }
}

impl From<CouplingPair> for CouplingSpec {
    fn from(c: CouplingPair) -> Self {
        CouplingSpec { p: c.p, q: c.q, q_series: c.series }
    }
}

impl CouplingPair {
    pub fn new(p: PiecewisePoly, q: PiecewisePoly) -> Result<Self> {
        Self::with_series(p, q, None)
    }

    pub fn with_series(p: PiecewisePoly, q: PiecewisePoly, series: Option<CosineSeries>) -> Result<Self> {
        if p.smoothness() < Smoothness::W1infty {
            return Err(Error::InsufficientSmoothness(format!("p is {}", p.smoothness())));
        }
        let dp = p.derivative()?;
        let series = series.filter(|s| !s.is_zero());
        let support_p = p.support();
        let mut support_q = q.support();
        if let Some(s) = &series {
            let iv = Interval::new(0.0, s.extent.length())?;
            support_q.push(iv);
            support_q = merge_intervals(support_q);
        }
        Ok(CouplingPair { p, dp, q, series, support_p, support_q })
    }

    pub fn zero() -> Self {
        Self::new(PiecewisePoly::zero(), PiecewisePoly::zero()).expect("zero pair is valid")
    }

    pub fn p(&self) -> &PiecewisePoly {
        &self.p
    }
    pub fn dp(&self) -> &PiecewisePoly {
        &self.dp
    }
    pub fn q_poly(&self) -> &PiecewisePoly {
        &self.q
    }
    pub fn series(&self) -> Option<&CosineSeries> {
        self.series.as_ref()
    }
    pub fn support_p(&self) -> &[Interval] {
        &self.support_p
    }
    pub fn support_q(&self) -> &[Interval] {
        &self.support_q
    }

    pub fn q(&self, x: f64) -> f64 {
        self.q.eval(x) + self.series.as_ref().map_or(0.0, |s| s.eval(x))
    }

    /// `q - p'/2`, the density of the coupling indices.
    pub fn density(&self, x: f64) -> f64 {
        self.q(x) - 0.5 * self.dp.eval(x)
    }

    /// Every breakpoint of p, q and the series cut-off.
    pub fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.p.breaks().iter().chain(self.q.breaks()).copied().collect();
        if let Some(s) = &self.series {
            b.push(s.extent.length());
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Highest angular frequency carried by q.
    pub fn q_frequency(&self) -> f64 {
        self.series.as_ref().map_or(0.0, CosineSeries::max_frequency)
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero() && self.series.is_none()
    }

    /// True when both p and q vanish identically on `omega`.
    pub fn avoids(&self, omega: &Interval) -> bool {
        !self.support_p.iter().chain(&self.support_q).any(|s| s.overlaps(omega))
    }

    pub(crate) fn require_disjoint(&self, omega: &Interval) -> Result<()> {
        if let Some(s) = self.support_p.iter().chain(&self.support_q).find(|s| s.overlaps(omega)) {
            return Err(Error::SupportOverlap { support: s.to_string(), omega: omega.to_string() });
        }
        Ok(())
    }

    /// Zero threshold `1e-12 (1 + |q|_inf + |p'|_inf)`.
    pub fn zero_threshold(&self) -> f64 {
        let qs = self.q.sup_norm() + self.series.as_ref().map_or(0.0, CosineSeries::abs_sum);
        1e-12 * (1.0 + qs + self.dp.sup_norm())
    }

    /// Multiply both coefficients by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let series = self.series.as_ref().map(|ser| ser.scale(s));
        Self::with_series(self.p.scale(s), self.q.scale(s), series)
    }
}

fn merge_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    let mut out: Vec<Interval> = Vec::new();
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.lo() <= last.hi() => {
                *last = Interval::new(last.lo(), last.hi().max(iv.hi())).expect("merged interval");
            }
            _ => out.push(iv),
        }
    }
    out
}

fn polynomial_index(cp: &CouplingPair, a: f64, k: usize, rule: &QuadratureRule) -> Result<CouplingIndex> {
    if cp.p.is_zero() && cp.q.is_zero() {
        return Ok(CouplingIndex::exact(0.0));
    }
    let phi = crate::funcspace::SineMode::new_unchecked(k);
    let est = integrate_fn(
        |x| {
            let v = phi.value(x);
            (cp.q.eval(x) - 0.5 * cp.dp.eval(x)) * v * v
        },
        0.0,
        a,
        &cp.breaks(),
        2.0 * k as f64,
        rule,
    )?;
    Ok(CouplingIndex::approximate(est.value, est.error))
}

/// `I_k = int_0^pi (q - p'/2) phi_k^2`.
pub fn compute_ik(cp: &CouplingPair, k: usize, rule: &QuadratureRule) -> Result<CouplingIndex> {
    compute_iak(cp, PI, k, rule)
}

/// `I_(a,k) = int_0^a (q - p'/2) phi_k^2`.
pub fn compute_iak(cp: &CouplingPair, a: f64, k: usize, rule: &QuadratureRule) -> Result<CouplingIndex> {
    if k == 0 || !(a > 0.0 && a <= PI + 1e-12) {
        return Err(Error::InvalidInput(format!("need k >= 1 and a in (0, pi], got k = {k}, a = {a}")));
    }
    let a = a.min(PI);
    let poly = polynomial_index(cp, a, k, rule)?;
    Ok(match &cp.series {
        Some(s) => poly.add(s.index(a, k)),
        None => poly,
    })
}

/// Riemann-Lebesgue limits of the coupling indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexLimits {
    /// `(1/pi) int_0^pi (q - p'/2)`.
    pub i: f64,
    /// `(1/pi) int_0^a (q - p'/2)`.
    pub i_a: f64,
    /// `|I_K - I|` at the largest mode examined.
    pub gap_at_k: f64,
    pub k: usize,
}

pub fn compute_limits(cp: &CouplingPair, a: f64, k_max: usize, rule: &QuadratureRule) -> Result<IndexLimits> {
    let mean = |b: f64| -> Result<f64> {
        let poly = integrate_fn(|x| cp.q.eval(x) - 0.5 * cp.dp.eval(x), 0.0, b, &cp.breaks(), 0.0, rule)?.value / PI;
        Ok(poly + cp.series.as_ref().map_or(0.0, |s| s.mean(b)))
    };
    let i = mean(PI)?;
    let i_a = mean(a.min(PI))?;
    let k = k_max.max(1);
    let ik = compute_ik(cp, k, rule)?;
    Ok(IndexLimits { i, i_a, gap_at_k: (ik.value - i).abs(), k })
}
