use serde::{Deserialize, Serialize};

use super::{snap_endpoint, Interval, Poly, Smoothness, PI};
use crate::error::{Error, Result};

const CONTINUITY_TOL: f64 = 1e-12;
const BREAK_MERGE_TOL: f64 = 1e-14;

/// Piecewise polynomial on `[0, pi]`.
///
/// Each piece is stored about its own center, which keeps high-degree
/// approximants well conditioned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseSpec", into = "PiecewiseSpec")]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Poly>,
    smoothness: Smoothness,
}

/// Serialized form: a smoothness tag and a list of segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    pub smoothness: Smoothness,
    pub segments: Vec<SegmentSpec>,
}

/// One segment; `coeffs` are ascending in `x - center` (center defaults to 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub interval: [f64; 2],
    #[serde(default)]
    pub center: f64,
    pub coeffs: Vec<f64>,
}

impl TryFrom<PiecewiseSpec> for PiecewisePoly {
    type Error = Error;
    fn try_from(spec: PiecewiseSpec) -> Result<Self> {
        let segs = spec.segments;
        if segs.is_empty() {
            return Err(Error::Config("piecewise function needs at least one segment".into()));
        }
        let mut breaks = vec![segs[0].interval[0]];
        for (i, s) in segs.iter().enumerate() {
            if i > 0 && (s.interval[0] - breaks[i]).abs() > BREAK_MERGE_TOL {
                return Err(Error::Config(format!(
                    "segment {i} starts at {} but previous ends at {}",
                    s.interval[0], breaks[i]
                )));
            }
            breaks.push(s.interval[1]);
        }
        let pieces = segs.into_iter().map(|s| Poly::new(s.center, s.coeffs)).collect();
        PiecewisePoly::new(breaks, pieces, spec.smoothness)
    }
}

impl From<PiecewisePoly> for PiecewiseSpec {
    fn from(f: PiecewisePoly) -> Self {
        let segments = f
            .breaks
            .windows(2)
            .zip(f.pieces)
            .map(|(w, p)| SegmentSpec { interval: [w[0], w[1]], center: p.center, coeffs: p.coeffs })
            .collect();
        PiecewiseSpec { smoothness: f.smoothness, segments }
    }
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, pieces: Vec<Poly>, smoothness: Smoothness) -> Result<Self> {
        let breaks: Vec<f64> = breaks.into_iter().map(snap_endpoint).collect();
        if breaks.len() < 2 || breaks[0] != 0.0 || *breaks.last().unwrap() != PI {
            return Err(Error::InvalidInput(format!("breakpoints must run from 0 to pi, got {breaks:?}")));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(format!("breakpoints must increase strictly: {breaks:?}")));
        }
        if pieces.len() + 1 != breaks.len() {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints need {} pieces, got {}",
                breaks.len(),
                breaks.len() - 1,
                pieces.len()
            )));
        }
        if pieces.iter().any(|p| p.coeffs.iter().any(|c| !c.is_finite()) || !p.center.is_finite()) {
            return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
        }
        let f = PiecewisePoly { breaks, pieces, smoothness };
        if smoothness >= Smoothness::W1infty {
            f.check_continuity()?;
        }
        Ok(f)
    }

    fn check_continuity(&self) -> Result<()> {
        for i in 1..self.pieces.len() {
            let x = self.breaks[i];
            let l = self.pieces[i - 1].eval(x);
            let r = self.pieces[i].eval(x);
            if (l - r).abs() > CONTINUITY_TOL * (1.0 + l.abs().max(r.abs())) {
                return Err(Error::InvalidInput(format!(
                    "jump {l} -> {r} at x = {x} is incompatible with {}",
                    self.smoothness
                )));
            }
        }
        Ok(())
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        PiecewisePoly { breaks: vec![0.0, PI], pieces: vec![Poly::constant(c)], smoothness: Smoothness::W2infty }
    }

    /// Single global polynomial with ascending coefficients in `x`.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        PiecewisePoly {
            breaks: vec![0.0, PI],
            pieces: vec![Poly::new(0.0, coeffs).recenter(0.5 * PI)],
            smoothness: Smoothness::W2infty,
        }
    }

    /// Pieces given by ascending coefficients in the global variable `x`.
    pub fn from_global(breaks: Vec<f64>, coeffs: Vec<Vec<f64>>, smoothness: Smoothness) -> Result<Self> {
        let pieces: Vec<Poly> = breaks
            .windows(2)
            .zip(coeffs)
            .map(|(w, c)| Poly::new(0.0, c).recenter(0.5 * (w[0] + w[1])))
            .collect();
        PiecewisePoly::new(breaks, pieces, smoothness)
    }

    /// `value` on `iv`, zero elsewhere.
    pub fn indicator(iv: Interval, value: f64) -> Self {
        let mut breaks = vec![0.0];
        let mut pieces = Vec::new();
        if iv.lo() > 0.0 {
            breaks.push(iv.lo());
            pieces.push(Poly::zero());
        }
        breaks.push(iv.hi());
        pieces.push(Poly::constant(value));
        if iv.hi() < PI {
            breaks.push(PI);
            pieces.push(Poly::zero());
        }
        PiecewisePoly { breaks, pieces, smoothness: Smoothness::Linfty }
    }

    /// Polynomial `inner` on `iv`, zero elsewhere, with the declared class.
    pub fn embed(iv: Interval, inner: Poly, smoothness: Smoothness) -> Result<Self> {
        let mut f = Self::indicator(iv, 1.0);
        let idx = f.breaks.iter().position(|&b| b == iv.lo()).unwrap();
        f.pieces[idx] = inner;
        f.smoothness = smoothness;
        if smoothness >= Smoothness::W1infty {
            f.check_continuity()?;
        }
        Ok(f)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }
    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Override the declared class after checking continuity when needed.
    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Result<Self> {
        self.smoothness = smoothness;
        if smoothness >= Smoothness::W1infty {
            self.check_continuity()?;
        }
        Ok(self)
    }

    pub fn segment_index(&self, x: f64) -> usize {
        let n = self.pieces.len();
        self.breaks.partition_point(|&b| b <= x).saturating_sub(1).min(n - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.segment_index(x)].eval(x)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Poly::is_zero)
    }

    pub fn derivative(&self) -> Result<Self> {
        let smoothness = self
            .smoothness
            .decrement()
            .ok_or_else(|| Error::InsufficientSmoothness(self.smoothness.to_string()))?;
        Ok(PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(Poly::derivative).collect(),
            smoothness,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(s)).collect(),
            smoothness: self.smoothness,
        }
    }

    fn merged_breaks(&self, other: &Self) -> Vec<f64> {
        merge_breaks(self.breaks.iter().chain(&other.breaks).copied())
    }

    fn combine(&self, other: &Self, op: impl Fn(&Poly, &Poly, f64) -> Poly) -> Self {
        let breaks = self.merged_breaks(other);
        let pieces = breaks
            .windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                op(&self.pieces[self.segment_index(m)], &other.pieces[other.segment_index(m)], m)
            })
            .collect();
        PiecewisePoly { breaks, pieces, smoothness: self.smoothness.min(other.smoothness) }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b, m| a.add_at(b, m))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b, m| a.add_at(&b.scale(-1.0), m))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, |a, b, m| a.mul_at(b, m))
    }

    /// Same function on a refinement containing `extra` breakpoints.
    pub fn refine(&self, extra: &[f64]) -> Self {
        let inside = extra.iter().copied().filter(|&b| b > 0.0 && b < PI);
        let breaks = merge_breaks(self.breaks.iter().copied().chain(inside));
        let pieces = breaks
            .windows(2)
            .map(|w| self.pieces[self.segment_index(0.5 * (w[0] + w[1]))].clone())
            .collect();
        PiecewisePoly { breaks, pieces, smoothness: self.smoothness }
    }

    /// Maximal intervals on which the function is not identically zero.
    pub fn support(&self) -> Vec<Interval> {
        let mut out: Vec<Interval> = Vec::new();
        let mut open: Option<f64> = None;
        for (i, p) in self.pieces.iter().enumerate() {
            match (p.is_zero(), open) {
                (false, None) => open = Some(self.breaks[i]),
                (true, Some(lo)) => {
                    out.push(Interval::new(lo, self.breaks[i]).expect("ordered breaks"));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(lo) = open {
            out.push(Interval::new(lo, PI).expect("ordered breaks"));
        }
        out
    }

    /// True when the function vanishes identically on `iv`.
    pub fn vanishes_on(&self, iv: &Interval) -> bool {
        self.breaks
            .windows(2)
            .zip(&self.pieces)
            .all(|(w, p)| p.is_zero() || w[1] <= iv.lo() || w[0] >= iv.hi())
    }

    /// Sup norm over `iv`, estimated on a dense Chebyshev sampling of each piece.
    pub fn sup_norm_on(&self, iv: &Interval) -> f64 {
        let mut m: f64 = 0.0;
        for (w, p) in self.breaks.windows(2).zip(&self.pieces) {
            let (a, b) = (w[0].max(iv.lo()), w[1].min(iv.hi()));
            if a >= b {
                continue;
            }
            let n = 8 * (p.degree() + 4);
            for j in 0..=n {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * (std::f64::consts::PI * j as f64 / n as f64).cos();
                m = m.max(p.eval(x).abs());
            }
        }
        m
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_on(&Interval::full())
    }
}

/// Sorted union of breakpoints, merging near-duplicates and pinning the end at pi.
fn merge_breaks(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut all: Vec<f64> = it.collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for b in all {
        if out.last().is_none_or(|&l| b - l > BREAK_MERGE_TOL) {
            out.push(b);
        }
    }
    *out.last_mut().unwrap() = PI;
    out
}
