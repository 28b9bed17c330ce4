use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use super::{Interval, PiecewisePoly, PI};
use crate::error::{Error, Result};

const MAX_ORDER: usize = 64;

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub fn gauss_legendre(order: usize) -> &'static [(f64, f64)] {
    static CACHE: [OnceLock<Vec<(f64, f64)>>; MAX_ORDER + 1] = [const { OnceLock::new() }; MAX_ORDER + 1];
    let n = order.clamp(1, MAX_ORDER);
    CACHE[n].get_or_init(|| {
        let rule = GaussLegendre::new(NonZeroUsize::new(n).unwrap());
        let mut v: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    })
}

/// Composite Gauss-Legendre configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    /// Minimum number of panels between consecutive breakpoints.
    pub panels_per_segment: usize,
    /// Gauss-Legendre nodes per panel.
    pub order: usize,
    /// Absolute error target for the whole integral.
    pub tol: f64,
    /// Maximum bisection depth per panel.
    pub max_depth: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule { panels_per_segment: 1, order: 16, tol: 1e-12, max_depth: 40 }
    }
}

impl QuadratureRule {
    pub fn with_tol(tol: f64) -> Self {
        QuadratureRule { tol, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.panels_per_segment == 0 || self.order == 0 || self.order > MAX_ORDER || !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("invalid quadrature rule {self:?}")));
        }
        Ok(())
    }
}

/// An integral together with its estimated absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn panel(f: &impl Fn(f64) -> f64, a: f64, b: f64, nodes: &[(f64, f64)]) -> (f64, f64) {
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    let (mut s, mut sa) = (0.0, 0.0);
    for &(x, w) in nodes {
        let v = f(m + h * x);
        s += w * v;
        sa += w * v.abs();
    }
    (s * h, sa * h.abs())
}

struct Adaptive<'a, F> {
    f: &'a F,
    nodes: &'a [(f64, f64)],
    tol_density: f64,
    max_depth: usize,
    stalled: bool,
}

impl<F: Fn(f64) -> f64> Adaptive<'_, F> {
    fn run(&mut self, a: f64, b: f64, whole: f64, depth: usize) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let (l, la) = panel(self.f, a, m, self.nodes);
        let (r, ra) = panel(self.f, m, b, self.nodes);
        let halves = l + r;
        let diff = (whole - halves).abs();
        let floor = 64.0 * f64::EPSILON * (la + ra);
        if diff <= (self.tol_density * (b - a)).max(floor) {
            return (halves, diff);
        }
        if depth >= self.max_depth || m <= a || m >= b {
            self.stalled = true;
            return (halves, diff);
        }
        let (v1, e1) = self.run(a, m, l, depth + 1);
        let (v2, e2) = self.run(m, b, r, depth + 1);
        (v1 + v2, e1 + e2)
    }
}

/// Adaptive integral of a callable over `[lo, hi]`.
///
/// Panels are aligned to `breaks` and, for an integrand oscillating at
/// angular frequency `freq`, at least four panels cover each period.
pub fn integrate_fn<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    freq: f64,
    rule: &QuadratureRule,
) -> Result<Estimate> {
    rule.validate()?;
    if hi <= lo {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let nodes = gauss_legendre(rule.order);
    let mut cuts = vec![lo];
    cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    let mut ad = Adaptive {
        f: &f,
        nodes,
        tol_density: rule.tol / (hi - lo),
        max_depth: rule.max_depth,
        stalled: false,
    };
    let (mut value, mut error) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let per_period = (4.0 * freq.abs() * (b - a) / (2.0 * PI)).ceil() as usize;
        let n = rule.panels_per_segment.max(per_period).max(1);
        let h = (b - a) / n as f64;
        for i in 0..n {
            let pa = a + h * i as f64;
            let pb = if i + 1 == n { b } else { a + h * (i + 1) as f64 };
            let (whole, _) = panel(&f, pa, pb, nodes);
            let (v, e) = ad.run(pa, pb, whole, 0);
            value += v;
            error += e;
        }
    }
    if !value.is_finite() || (ad.stalled && error > rule.tol) {
        return Err(Error::NonConvergedQuadrature { lo, hi, error, tol: rule.tol });
    }
    Ok(Estimate { value, error })
}

/// Integral of a piecewise polynomial over `iv`.
pub fn integrate(f: &PiecewisePoly, iv: Interval, rule: &QuadratureRule) -> Result<Estimate> {
    integrate_fn(|x| f.eval(x), iv.lo(), iv.hi(), f.breaks(), 0.0, rule)
}

/// Fixed composite Gauss-Legendre grid for repeated inner products.
#[derive(Clone, Debug)]
pub struct PanelGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelGrid {
    /// Uniform panels of width at most `max_width`, aligned to `breaks`.
    pub fn new(lo: f64, hi: f64, breaks: &[f64], max_width: f64, order: usize) -> Self {
        let gl = gauss_legendre(order);
        let mut cuts = vec![lo];
        cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = ((b - a) / max_width).ceil().max(1.0) as usize;
            let h = (b - a) / n as f64;
            for i in 0..n {
                let pa = a + h * i as f64;
                let m = pa + 0.5 * h;
                for &(x, wt) in gl {
                    nodes.push(m + 0.5 * h * x);
                    weights.push(0.5 * h * wt);
                }
            }
        }
        PanelGrid { nodes, weights }
    }

    pub fn sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}
