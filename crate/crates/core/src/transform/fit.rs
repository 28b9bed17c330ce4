//! Piecewise Chebyshev fitting used to keep every change of unknown inside
//! the piecewise-polynomial class.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::funcspace::{chebyshev_fit, PiecewisePoly, Poly, Smoothness, PI};

pub(crate) const FIT_DEGREE: usize = 24;
const MAX_DEPTH: usize = 14;

/// A polynomial valid on `[lo, hi]`.
#[derive(Clone, Debug)]
pub(crate) struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub poly: Poly,
}

/// Bisect `[lo, hi]` until every Chebyshev fit meets `tol` relative to the
/// sampled magnitude of `f`.
pub(crate) fn fit_adaptive(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    fit_rec(f, lo, hi, tol, 0, &mut out)?;
    Ok(out)
}

fn fit_rec(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64, depth: usize, out: &mut Vec<Segment>) -> Result<()> {
    let fit = chebyshev_fit(f, lo, hi, FIT_DEGREE);
    let scale = (0..=8).map(|i| f(lo + (hi - lo) * i as f64 / 8.0).abs()).fold(1.0, f64::max);
    // Below a few ulps the sampled error is rounding noise.
    if fit.sup_error <= tol.max(64.0 * f64::EPSILON) * scale {
        out.push(Segment { lo, hi, poly: fit.poly });
        return Ok(());
    }
    if depth >= MAX_DEPTH {
        return Err(Error::InvalidInput(format!(
            "function could not be fitted on ({lo}, {hi}) to {tol:e}: error {:e}",
            fit.sup_error
        )));
    }
    let mid = 0.5 * (lo + hi);
    fit_rec(f, lo, mid, tol, depth + 1, out)?;
    fit_rec(f, mid, hi, tol, depth + 1, out)
}

/// Glue segments into a function on `[0, pi]`, filling gaps with `left`
/// below the first segment and `right` above the last one.
pub(crate) fn assemble(segments: Vec<Segment>, left: f64, right: f64, smoothness: Smoothness) -> Result<PiecewisePoly> {
    let mut breaks = vec![0.0];
    let mut pieces = Vec::new();
    let first = segments.first().map_or(PI, |s| s.lo);
    if first > 0.0 {
        breaks.push(first);
        pieces.push(Poly::constant(left));
    }
    for s in segments {
        if s.lo > *breaks.last().unwrap() {
            return Err(Error::InvalidInput(format!("gap before segment ({}, {})", s.lo, s.hi)));
        }
        breaks.push(s.hi);
        pieces.push(s.poly);
    }
    if *breaks.last().unwrap() < PI {
        breaks.push(PI);
        pieces.push(Poly::constant(right));
    }
    PiecewisePoly::new(breaks, pieces, smoothness)
}

/// Quintic on `[x0, x1]` matching value, slope and curvature at both ends.
pub(crate) fn quintic_bridge(x0: f64, start: [f64; 3], x1: f64, end: [f64; 3]) -> Poly {
    let h = x1 - x0;
    let (c0, c1, c2) = (start[0], start[1], 0.5 * start[2]);
    let m = Matrix3::new(h.powi(3), h.powi(4), h.powi(5), 3.0 * h * h, 4.0 * h.powi(3), 5.0 * h.powi(4), 6.0 * h, 12.0 * h * h, 20.0 * h.powi(3));
    let rhs = Vector3::new(
        end[0] - (c0 + c1 * h + c2 * h * h),
        end[1] - (c1 + 2.0 * c2 * h),
        end[2] - 2.0 * c2,
    );
    let sol = m.lu().solve(&rhs).unwrap_or_else(Vector3::zeros);
    Poly::new(x0, vec![c0, c1, c2, sol[0], sol[1], sol[2]])
}

/// `[f, f', f'']` of a piecewise polynomial at `x`, taken from the piece
/// on the requested side.
pub(crate) fn jet(f: &PiecewisePoly, x: f64, from_left: bool) -> [f64; 3] {
    let probe = if from_left { x - 1e-12 } else { x + 1e-12 };
    let poly = &f.pieces()[f.segment_index(probe)];
    let d1 = poly.derivative();
    let d2 = d1.derivative();
    [poly.eval(x), d1.eval(x), d2.eval(x)]
}

/// Minimum over a dense sampling of every piece.
pub(crate) fn sampled_min(f: &PiecewisePoly) -> f64 {
    let mut m = f64::INFINITY;
    for (w, p) in f.breaks().windows(2).zip(f.pieces()) {
        let n = 4 * (p.degree() + 4);
        for j in 0..=n {
            m = m.min(p.eval(w[0] + (w[1] - w[0]) * j as f64 / n as f64));
        }
    }
    m
}
