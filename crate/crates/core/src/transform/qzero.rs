//! Changes of unknown that cancel q on a subwindow of the control region.

use crate::classify::IndexTable;
use crate::error::{Error, Result};
use crate::funcspace::{Interval, QuadratureRule, Smoothness, PI};
use crate::spectral::CouplingPair;

use super::{apply_change, assemble, fit_adaptive, quintic_bridge, Provenance, Segment, UnknownChange};

const SCAN_CELLS: usize = 256;
const WINDOW_FRACTION: f64 = 0.25;
const RESIDUAL_TOL: f64 = 1e-10;

/// Longest run of scan cells in `omega` (outside any cosine-series support)
/// on which `|f|` stays above a quarter of its sampled maximum.
pub(crate) fn scan_window(f: &dyn Fn(f64) -> f64, cp: &CouplingPair, omega: &Interval) -> Result<(Interval, f64)> {
    let lo = cp.series().map_or(omega.lo(), |s| omega.lo().max(s.extent.length()));
    let hi = omega.hi();
    let fail = |threshold| Error::NoNonvanishingWindow { omega: omega.to_string(), threshold };
    if lo >= hi {
        return Err(fail(0.0));
    }
    let h = (hi - lo) / SCAN_CELLS as f64;
    let mins: Vec<f64> = (0..SCAN_CELLS)
        .map(|c| (0..=4).map(|i| f(lo + h * (c as f64 + i as f64 / 4.0)).abs()).fold(f64::INFINITY, f64::min))
        .collect();
    let peak = mins.iter().copied().fold(0.0, f64::max);
    if peak <= 1e-12 {
        return Err(fail(1e-12));
    }
    let threshold = WINDOW_FRACTION * peak;
    let (mut best, mut run_start) = ((0, 0), None);
    for c in 0..=SCAN_CELLS {
        let good = c < SCAN_CELLS && mins[c] >= threshold;
        match (good, run_start) {
            (true, None) => run_start = Some(c),
            (false, Some(s)) => {
                if c - s > best.1 - best.0 {
                    best = (s, c);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let iv = Interval::new(lo + h * best.0 as f64, lo + h * best.1 as f64)?;
    Ok((iv, threshold))
}

/// Subinterval of `omega` where `|p|` is bounded below, with the bound used.
pub fn nonvanishing_window(cp: &CouplingPair, omega: &Interval) -> Result<(Interval, f64)> {
    scan_window(&|x| cp.p().eval(x), cp, omega)
}

#[derive(Clone, Debug)]
pub struct QzeroOptions {
    pub k_max: usize,
    /// Budget on `max_k |I_k(p,q) - I_k(p_hat,q_hat)|`; defaults to half the
    /// smallest nonzero `|I_k|`.
    pub eps: Option<f64>,
    pub max_shrinks: usize,
    pub rule: QuadratureRule,
}

impl Default for QzeroOptions {
    fn default() -> Self {
        QzeroOptions { k_max: 30, eps: None, max_shrinks: 20, rule: QuadratureRule::default() }
    }
}

pub fn build_theta_qzero(cp: &CouplingPair, omega: &Interval) -> Result<UnknownChange> {
    build_theta_qzero_with(cp, omega, &QzeroOptions::default())
}

/// `theta = exp(-int q/p)` on a window inside the nonvanishing part of
/// `omega`, bridged to 1 by C2 quintics; the window shrinks until the
/// coupling indices move by at most the budget.
pub fn build_theta_qzero_with(cp: &CouplingPair, omega: &Interval, opts: &QzeroOptions) -> Result<UnknownChange> {
    let (tilde, _) = nonvanishing_window(cp, omega)?;
    let geometry = |s: f64| {
        let half = s * tilde.len() / 6.0;
        (tilde.mid() - half, tilde.mid() + half, half)
    };
    if cp.q_poly().vanishes_on(&tilde) {
        let (lo, hi, _) = geometry(1.0);
        let w = Interval::new(lo, hi)?;
        return Ok(UnknownChange { q_free: Some(w), ..UnknownChange::identity(w) });
    }
    let base = IndexTable::compute(cp, PI, opts.k_max, &opts.rule)?;
    let eps = opts.eps.unwrap_or_else(|| {
        let nz = base.ik.iter().map(|i| i.value.abs()).filter(|v| *v > base.zero_threshold).fold(f64::INFINITY, f64::min);
        0.5 * nz
    });
    let mut last_gap = f64::INFINITY;
    for shrink in 0..=opts.max_shrinks {
        let (lo, hi, half) = geometry(0.5f64.powi(shrink as i32));
        let ch = qzero_change(cp, lo, hi, half)?;
        let moved = apply_change(cp, &ch)?;
        let table = IndexTable::compute(&moved, PI, opts.k_max, &opts.rule)?;
        last_gap = base.ik.iter().zip(&table.ik).map(|(a, b)| (a.value - b.value).abs()).fold(0.0, f64::max);
        if last_gap <= eps {
            return Ok(ch);
        }
    }
    Err(Error::FailedPrecondition {
        modes: Vec::new(),
        reason: format!("window shrinking left an index change of {last_gap:e} above the budget"),
    })
}

fn qzero_change(cp: &CouplingPair, lo: f64, hi: f64, half: f64) -> Result<UnknownChange> {
    let mut cuts: Vec<f64> = vec![lo];
    cuts.extend(cp.breaks().into_iter().filter(|&b| b > lo + 1e-12 && b < hi - 1e-12));
    cuts.push(hi);

    let mut segs: Vec<Segment> = Vec::new();
    // Running value of int_lo^x q/p.
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let ratio = |x: f64| cp.q(x) / cp.p().eval(x);
        for r in fit_adaptive(&ratio, w[0], w[1], 1e-14)? {
            let anti = r.poly.antiderivative();
            let offset = acc - anti.eval(r.lo);
            let theta = |x: f64| (-(anti.eval(x) + offset)).exp();
            segs.extend(fit_adaptive(&theta, r.lo, r.hi, 1e-14)?);
            acc = anti.eval(r.hi) + offset;
        }
    }

    let first = &segs[0].poly;
    let d1 = first.derivative();
    let start = [first.eval(lo), d1.eval(lo), d1.derivative().eval(lo)];
    let last = &segs[segs.len() - 1].poly;
    let e1 = last.derivative();
    let end = [last.eval(hi), e1.eval(hi), e1.derivative().eval(hi)];

    check_residual(cp, &segs)?;

    let mut all = vec![Segment { lo: lo - half, hi: lo, poly: quintic_bridge(lo - half, [1.0, 0.0, 0.0], lo, start) }];
    all.extend(segs);
    all.push(Segment { lo: hi, hi: hi + half, poly: quintic_bridge(hi, end, hi + half, [1.0, 0.0, 0.0]) });
    let theta = assemble(all, 1.0, 1.0, Smoothness::W2infty)?;
    let ch = UnknownChange {
        theta,
        kappa_values: vec![1.0, end[0]],
        window: Interval::new(lo - half, hi + half)?,
        provenance: Provenance::Qzero,
        q_free: Some(Interval::new(lo, hi)?),
    };
    ch.validate()?;
    Ok(ch)
}

fn check_residual(cp: &CouplingPair, segs: &[Segment]) -> Result<()> {
    let mut worst: f64 = 0.0;
    for s in segs {
        let d = s.poly.derivative();
        for i in 0..=32 {
            let x = s.lo + (s.hi - s.lo) * i as f64 / 32.0;
            worst = worst.max((cp.p().eval(x) * d.eval(x) + cp.q(x) * s.poly.eval(x)).abs());
        }
    }
    if worst > RESIDUAL_TOL {
        return Err(Error::FailedPrecondition {
            modes: Vec::new(),
            reason: format!("p theta' + q theta residual {worst:e} exceeds {RESIDUAL_TOL:e}"),
        });
    }
    Ok(())
}
