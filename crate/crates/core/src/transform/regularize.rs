//! Pipeline that turns a coupling pair whose indices vanish on some modes
//! into an equivalent pair with every index of the first K modes nonzero.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classify::IndexTable;
use crate::error::{Error, Result};
use crate::funcspace::{integrate_fn, Interval, PiecewisePoly, Poly, QuadratureRule, SineMode, Smoothness, PI};
use crate::spectral::{compute_limits, CouplingPair};

use super::qzero::{nonvanishing_window, scan_window};
use super::{
    apply_change, assemble, bump_change, build_theta_qzero_with, choose_kappa, fit_adaptive, jk_closed_form, select_ell,
    EllChoice, Provenance, QzeroOptions, UnknownChange,
};

#[derive(Clone, Debug)]
pub struct RegularizeOptions {
    pub k_max: usize,
    pub rule: QuadratureRule,
    /// Zero threshold for the indices; defaults to the pair's own.
    pub eps_i: Option<f64>,
    /// Largest bump frequency tried in the non-constant case.
    pub scan_bound: usize,
    /// Retries, each shrinking the right end by 10%, when the quarter-point
    /// test cannot tell a mode apart from its mirror image.
    pub max_shrinks: usize,
}

impl Default for RegularizeOptions {
    fn default() -> Self {
        RegularizeOptions { k_max: 30, rule: QuadratureRule::default(), eps_i: None, scan_bound: 64, max_shrinks: 5 }
    }
}

/// One applied change with the index tables of the resulting pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRecord {
    pub provenance: Provenance,
    pub change: UnknownChange,
    pub p_hat: PiecewisePoly,
    pub q_hat: PiecewisePoly,
    pub ik: Vec<f64>,
    pub iak: Vec<f64>,
}

/// `sup_k |J_(m,k)|` against half the smallest surviving `|I_k|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizingCheck {
    pub sup_j: f64,
    pub half_min: f64,
}

impl SizingCheck {
    pub fn holds(&self) -> bool {
        self.sup_j <= self.half_min * (1.0 + 1e-9)
    }
}

/// A frequency bump added for one vanishing mode.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepTwoBump {
    pub mode: usize,
    pub j: usize,
    pub kappa: f64,
    pub sizing: SizingCheck,
    pub ik_after: Vec<f64>,
}

/// Which step made `I_k` nonzero; `None` means it already was.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub k: usize,
    pub fixed_by: Option<Provenance>,
    /// Certified through a nonzero `I_(alpha,k)` rather than `I_k`.
    pub via_boundary_index: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RegularizationTrace {
    pub steps: Vec<StepRecord>,
    pub ell: Option<EllChoice>,
    pub window_kappa: Option<f64>,
    pub bumps: Vec<StepTwoBump>,
    pub residual_sets: Vec<Vec<usize>>,
    pub certification: Vec<Certification>,
    pub window: Option<Interval>,
    /// `|I| - max_(k > K/2) |I_k - I|` of the final pair.
    pub tail_margin: f64,
    pub lower_exponent: f64,
    pub min_abs_ik: f64,
}

impl RegularizationTrace {
    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    /// Composite multiplier of every applied change.
    pub fn theta_total(&self) -> Option<UnknownChange> {
        let mut it = self.steps.iter().map(|s| s.change.clone());
        let first = it.next()?;
        Some(it.fold(first, |acc, c| acc.compose(&c)))
    }

    /// Key=value log of the choices made.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "steps={}", self.steps.len());
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(out, "step.{i}.kind={:?}", s.provenance);
            let _ = writeln!(out, "step.{i}.window={}", s.change.window);
            let _ = writeln!(out, "step.{i}.kappa={:?}", s.change.kappa_values);
        }
        if let Some(e) = &self.ell {
            let _ = writeln!(out, "ell.n={}\nell.value={:.17e}\nell.rational={}/{}\nell.sin_gap={:.6e}", e.n, e.ell, e.num, e.den, e.sin_gap);
            let _ = writeln!(out, "ell.window=({:.17e}, {:.17e})", e.lo, e.hi);
        }
        if let Some(k) = self.window_kappa {
            let _ = writeln!(out, "kappa={k:.17e}");
        }
        for b in &self.bumps {
            let _ = writeln!(out, "bump.mode={} j={} kappa={:.17e} sup_j={:.6e} half_min={:.6e}", b.mode, b.j, b.kappa, b.sizing.sup_j, b.sizing.half_min);
        }
        for (m, s) in self.residual_sets.iter().enumerate() {
            let _ = writeln!(out, "residual_set.{m}={s:?}");
        }
        let _ = writeln!(out, "min_abs_ik={:.6e}\nlower_exponent={:.6}\ntail_margin={:.6e}", self.min_abs_ik, self.lower_exponent, self.tail_margin);
        out
    }
}

pub fn regularize(cp: &CouplingPair, omega: &Interval, k_max: usize) -> Result<(CouplingPair, RegularizationTrace)> {
    regularize_with(cp, omega, &RegularizeOptions { k_max, ..Default::default() })
}

struct Pipeline<'a> {
    opts: &'a RegularizeOptions,
    omega: Interval,
    eps: f64,
    trace: RegularizationTrace,
}

impl Pipeline<'_> {
    fn table(&self, cp: &CouplingPair) -> Result<IndexTable> {
        IndexTable::compute(cp, self.omega.lo(), self.opts.k_max, &self.opts.rule)
    }

    fn push(&mut self, cp: &CouplingPair, change: UnknownChange) -> Result<CouplingPair> {
        let next = apply_change(cp, &change)?;
        let t = self.table(&next)?;
        self.trace.steps.push(StepRecord {
            provenance: change.provenance,
            change,
            p_hat: next.p().clone(),
            q_hat: next.q_poly().clone(),
            ik: t.ik.iter().map(|i| i.value).collect(),
            iak: t.iak.iter().map(|i| i.value).collect(),
        });
        Ok(next)
    }

    fn qzero(&mut self, cp: &CouplingPair, region: &Interval) -> Result<(CouplingPair, Interval)> {
        let opts = QzeroOptions { k_max: self.opts.k_max, rule: self.opts.rule, ..Default::default() };
        let ch = build_theta_qzero_with(cp, region, &opts)?;
        let window = ch.q_free.unwrap_or(ch.window);
        if ch.is_identity() {
            return Ok((cp.clone(), window));
        }
        Ok((self.push(cp, ch)?, window))
    }
}

/// Regularize `cp` so that `|I_k| + |I_(a,k)|` exceeds the zero threshold
/// for every `k <= K`, recording every change of unknown.
pub fn regularize_with(cp: &CouplingPair, omega: &Interval, opts: &RegularizeOptions) -> Result<(CouplingPair, RegularizationTrace)> {
    let eps = opts.eps_i.unwrap_or_else(|| cp.zero_threshold());
    let mut pl = Pipeline { opts, omega: *omega, eps, trace: RegularizationTrace::default() };
    let initial = pl.table(cp)?;
    let fine = |t: &IndexTable| -> Vec<bool> { t.ik.iter().zip(&t.iak).map(|(i, a)| i.value.abs() + a.value.abs() > eps).collect() };
    let initially_fine: Vec<bool> = initial.ik.iter().map(|i| i.value.abs() > eps).collect();

    let mut cur = cp.clone();
    if initial.ik.iter().any(|i| i.value.abs() <= eps) {
        let (tilde, _) = nonvanishing_window(&cur, omega)?;
        let (next, window) = pl.qzero(&cur, &tilde)?;
        cur = next;
        let window = if cur.q_poly().vanishes_on(&tilde) { tilde } else { window };
        let scale = 1.0 + cur.p().sup_norm_on(&window);
        if cur.dp().sup_norm_on(&window) <= 1e-12 * scale {
            cur = constant_p_path(&mut pl, &cur, &window)?;
        } else {
            cur = varying_p_path(&mut pl, cur, &window)?;
        }
    }

    let last = pl.table(&cur)?;
    let now_fine = fine(&last);
    let failing: Vec<usize> = (1..=opts.k_max).filter(|&k| !now_fine[k - 1]).collect();
    if !failing.is_empty() {
        return Err(Error::FailedPrecondition { modes: failing, reason: "indices still vanish after regularization".into() });
    }
    certify(&mut pl, &initially_fine, &last);
    let limit = compute_limits(&cur, omega.lo(), opts.k_max, &opts.rule)?;
    let tail = (opts.k_max / 2 + 1..=opts.k_max).map(|k| (last.ik[k - 1].value - limit.i).abs()).fold(0.0, f64::max);
    pl.trace.tail_margin = limit.i.abs() - tail;
    let abs: Vec<f64> = last.ik.iter().map(|i| i.value.abs()).collect();
    pl.trace.min_abs_ik = abs.iter().copied().fold(f64::INFINITY, f64::min);
    pl.trace.lower_exponent = lower_bound_exponent(&abs);
    Ok((cur, pl.trace))
}

fn certify(pl: &mut Pipeline, initially_fine: &[bool], last: &IndexTable) {
    let eps = pl.eps;
    for k in 1..=initially_fine.len() {
        let fixed_by = if initially_fine[k - 1] {
            None
        } else {
            pl.trace
                .steps
                .iter()
                .find(|s| s.ik[k - 1].abs() > eps)
                .map(|s| s.provenance)
        };
        let via_boundary_index = last.ik[k - 1].value.abs() <= eps;
        pl.trace.certification.push(Certification { k, fixed_by, via_boundary_index });
    }
}

/// Constant p and vanishing q on the window: one squared-sine bump on
/// quadratic-irrational endpoints, weighted by a separation constant.
fn constant_p_path(pl: &mut Pipeline, cp: &CouplingPair, window: &Interval) -> Result<CouplingPair> {
    let ell = select_ell(window.lo(), window.hi())?;
    let c = cp.p().eval(window.mid());
    let table = pl.table(cp)?;
    let jk: Vec<f64> = (1..=pl.opts.k_max).map(|k| jk_closed_form(ell.lo, ell.hi, k)).collect::<Result<_>>()?;
    let u: Vec<f64> = table.ik.iter().zip(&jk).map(|(i, j)| i.value / (c * j)).collect();
    let kappa = choose_kappa(&u, *u.last().unwrap_or(&0.0))?;
    pl.trace.ell = Some(ell);
    pl.trace.window_kappa = Some(kappa);
    let region = Interval::new(ell.lo, ell.hi)?;
    pl.trace.window = Some(region);
    pl.push(cp, bump_change(region, kappa, Provenance::Bump)?)
}

fn varying_p_path(pl: &mut Pipeline, mut cur: CouplingPair, window: &Interval) -> Result<CouplingPair> {
    let eps = pl.eps;
    // Step 1: make the limit index nonzero with a bump where p' keeps a sign.
    let limit = compute_limits(&cur, pl.omega.lo(), pl.opts.k_max, &pl.opts.rule)?;
    if limit.i.abs() <= eps {
        let (slope_window, _) = scan_window(&|x| cur.dp().eval(x), &cur, window)?;
        cur = pl.push(&cur, bump_change(slope_window, 1.0, Provenance::Step1)?)?;
        let (tilde, _) = nonvanishing_window(&cur, &pl.omega)?;
        let (next, _) = pl.qzero(&cur, &tilde)?;
        cur = next;
    }
    let (tilde, _) = nonvanishing_window(&cur, &pl.omega)?;
    let mut region = if cur.q_poly().vanishes_on(&tilde) {
        tilde
    } else {
        let (next, w) = pl.qzero(&cur, &tilde)?;
        cur = next;
        w
    };

    // Step 2: frequency bumps built against one base pair, accumulated.
    let base = cur.clone();
    let mut theta = PiecewisePoly::constant(1.0);
    let mut kappas = Vec::new();
    for _round in 0..=pl.opts.k_max {
        let trial = UnknownChange { theta: theta.clone(), kappa_values: kappas.clone(), window: region, provenance: Provenance::Step2, q_free: None };
        let now = apply_change(&base, &trial)?;
        let table = pl.table(&now)?;
        let residual: Vec<usize> = (1..=pl.opts.k_max)
            .filter(|&k| table.ik[k - 1].value.abs() <= eps && !p_phi_constant(base.p(), &region, k))
            .collect();
        pl.trace.residual_sets.push(residual.clone());
        let Some(&mode) = residual.first() else { break };

        region = separate_mirror(base.p(), region, mode, pl.opts.max_shrinks)?;
        let survivors = (1..=pl.opts.k_max)
            .filter(|k| !residual.contains(k))
            .map(|k| table.ik[k - 1].value.abs())
            .chain(std::iter::once(compute_limits(&now, pl.omega.lo(), pl.opts.k_max, &pl.opts.rule)?.i.abs()))
            .fold(f64::INFINITY, f64::min);
        let (j, weights) = scan_frequency(base.p(), &region, mode, 4 * pl.opts.k_max, pl.opts.scan_bound, &pl.opts.rule)?;
        let sup_w = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let p_sup = base.p().sup_norm_on(&region);
        let positivity_cap = 0.5 * PI * j as f64 / (region.len() * p_sup);
        let kappa = (survivors / sup_w).min(positivity_cap);
        let bump = frequency_bump(base.p(), &region, j)?.scale(kappa);
        theta = theta.add(&bump).with_smoothness(Smoothness::W2infty)?;
        kappas.push(kappa);
        let after = apply_change(&base, &UnknownChange { theta: theta.clone(), kappa_values: kappas.clone(), window: region, provenance: Provenance::Step2, q_free: None })?;
        let ik_after = pl.table(&after)?.ik.iter().map(|i| i.value).collect();
        pl.trace.bumps.push(StepTwoBump {
            mode,
            j,
            kappa,
            sizing: SizingCheck { sup_j: 0.5 * kappa * sup_w, half_min: 0.5 * survivors },
            ik_after,
        });
    }
    if !kappas.is_empty() {
        let change = UnknownChange { theta, kappa_values: kappas, window: region, provenance: Provenance::Step2, q_free: None };
        cur = pl.push(&base, change)?;
    }
    pl.trace.window = Some(region);

    // Step 3: modes left with I_k = 0 have p phi_k constant on the window.
    let table = pl.table(&cur)?;
    let at_alpha = IndexTable::compute(&cur, region.lo(), pl.opts.k_max, &pl.opts.rule)?;
    for m in 1..=pl.opts.k_max {
        if table.ik[m - 1].value.abs() > eps || at_alpha.iak[m - 1].value.abs() > eps {
            continue;
        }
        let others = (1..=pl.opts.k_max).filter(|&k| k != m).map(|k| table.ik[k - 1].value.abs()).fold(f64::INFINITY, f64::min);
        let change = boundary_offset_change(&cur, &region, others, pl.opts.k_max, &pl.opts.rule)?;
        cur = pl.push(&cur, change)?;
    }
    Ok(cur)
}

/// Whether `p phi_k` is constant on the window, to relative precision.
fn p_phi_constant(p: &PiecewisePoly, window: &Interval, k: usize) -> bool {
    let phi = SineMode::new_unchecked(k);
    let vals: Vec<f64> = (0..=16).map(|i| {
        let x = window.lo() + window.len() * i as f64 / 16.0;
        p.eval(x) * phi.value(x)
    }).collect();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    vals.iter().all(|v| (v - vals[0]).abs() <= 1e-8 * scale.max(1e-300))
}

/// Shrink the right end until `p phi_k` differs at the two quarter points.
fn separate_mirror(p: &PiecewisePoly, mut window: Interval, k: usize, max_shrinks: usize) -> Result<Interval> {
    let phi = SineMode::new_unchecked(k);
    for _ in 0..=max_shrinks {
        let (x1, x3) = (window.lo() + 0.25 * window.len(), window.lo() + 0.75 * window.len());
        let (a, b) = (p.eval(x1) * phi.value(x1), p.eval(x3) * phi.value(x3));
        if (a - b).abs() > 1e-9 * (a.abs() + b.abs()) {
            return Ok(window);
        }
        window = Interval::new(window.lo(), window.lo() + 0.9 * window.len())?;
    }
    Err(Error::FailedPrecondition { modes: vec![k], reason: format!("mirror-symmetric p phi_k persists after {max_shrinks} shrinks") })
}

/// First `j` with `int sin(2 pi j (s - lo) / len) p^2 phi_k^2 != 0`, and the
/// same integral for the first `n_modes` modes.
fn scan_frequency(p: &PiecewisePoly, window: &Interval, k: usize, n_modes: usize, bound: usize, rule: &QuadratureRule) -> Result<(usize, Vec<f64>)> {
    let weight = |j: usize, i: usize| -> Result<f64> {
        let phi = SineMode::new_unchecked(i);
        let f = |x: f64| (2.0 * PI * j as f64 * (x - window.lo()) / window.len()).sin() * (p.eval(x) * phi.value(x)).powi(2);
        let freq = 2.0 * PI * j as f64 / window.len() + 2.0 * i as f64;
        Ok(integrate_fn(f, window.lo(), window.hi(), p.breaks(), freq, rule)?.value)
    };
    let phi = SineMode::new_unchecked(k);
    let mass = integrate_fn(|x| (p.eval(x) * phi.value(x)).powi(2), window.lo(), window.hi(), p.breaks(), 2.0 * k as f64, rule)?.value;
    for j in 1..=bound {
        if weight(j, k)?.abs() > 1e-6 * mass {
            let all = (1..=n_modes).map(|i| weight(j, i)).collect::<Result<Vec<f64>>>()?;
            return Ok((j, all));
        }
    }
    Err(Error::StepScanExhausted { mode: k, bound })
}

/// `p(x) (len / 2 pi j) (1 - cos(2 pi j (x - lo) / len))` on the window.
fn frequency_bump(p: &PiecewisePoly, window: &Interval, j: usize) -> Result<PiecewisePoly> {
    let (lo, len) = (window.lo(), window.len());
    let w = 2.0 * PI * j as f64 / len;
    let f = move |x: f64| (1.0 - (w * (x - lo)).cos()) / w;
    let profile = assemble(fit_adaptive(&f, lo, window.hi(), 1e-14)?, 0.0, 0.0, Smoothness::W2infty)?;
    Ok(p.mul(&profile))
}

/// Offset change `theta = 1 + xi` with `xi = xi_alpha` left of the window,
/// `0` right of it, sized so every other index moves by at most half of
/// `others`.
fn boundary_offset_change(cp: &CouplingPair, window: &Interval, others: f64, k_max: usize, rule: &QuadratureRule) -> Result<UnknownChange> {
    let unit = boundary_profile(cp.p(), window, 1.0, rule)?;
    let trial = UnknownChange {
        theta: PiecewisePoly::constant(1.0).add(&unit),
        kappa_values: vec![1.0],
        window: *window,
        provenance: Provenance::Step3,
        q_free: None,
    };
    let base = IndexTable::compute(cp, PI, k_max, rule)?;
    let moved = IndexTable::compute(&apply_change(cp, &trial)?, PI, k_max, rule)?;
    let sup_j = base.ik.iter().zip(&moved.ik).map(|(a, b)| (a.value - b.value).abs()).fold(0.0, f64::max);
    let xi_sup = unit.sup_norm();
    let xi_alpha = (0.5 * others / sup_j.max(1e-300)).min(0.5 / xi_sup);
    Ok(UnknownChange {
        theta: PiecewisePoly::constant(1.0).add(&unit.scale(xi_alpha)).with_smoothness(Smoothness::W2infty)?,
        kappa_values: vec![xi_alpha],
        window: *window,
        provenance: Provenance::Step3,
        q_free: None,
    })
}

/// `xi = -p(x) int_x^hi 2h/p^2` with a quintic `h` chosen so that `xi`
/// equals `xi_alpha` with zero slope and curvature at the left end and
/// vanishes to second order at the right end. Returned on all of `[0, pi]`.
pub(crate) fn boundary_profile(p: &PiecewisePoly, window: &Interval, xi_alpha: f64, rule: &QuadratureRule) -> Result<PiecewisePoly> {
    let (a, b) = (window.lo(), window.hi());
    let pa = p.pieces()[p.segment_index(a + 1e-12)].clone();
    let (p0, p1, p2) = (pa.eval(a), pa.derivative().eval(a), pa.derivative().derivative().eval(a));
    let h = b - a;
    let mut m = DMatrix::<f64>::zeros(6, 6);
    let mut rhs = DVector::<f64>::zeros(6);
    for i in 0..6 {
        let fi = i as f64;
        m[(0, i)] = if i == 0 { 1.0 } else { 0.0 };
        m[(1, i)] = if i == 1 { 1.0 } else { 0.0 };
        m[(2, i)] = h.powi(i as i32);
        m[(3, i)] = if i >= 1 { fi * h.powi(i as i32 - 1) } else { 0.0 };
        m[(4, i)] = if i >= 2 { fi * (fi - 1.0) * h.powi(i as i32 - 2) } else { 0.0 };
        m[(5, i)] = integrate_fn(|x| 2.0 * (x - a).powi(i as i32) / p.eval(x).powi(2), a, b, p.breaks(), 0.0, rule)?.value;
    }
    rhs[0] = -0.5 * xi_alpha * p1;
    rhs[1] = -0.5 * xi_alpha * p2;
    rhs[5] = -xi_alpha / p0;
    let c = m.lu().solve(&rhs).ok_or_else(|| Error::InvalidInput("boundary profile system is singular".into()))?;
    let hpoly = Poly::new(a, c.iter().copied().collect());

    let integrand = |x: f64| 2.0 * hpoly.eval(x) / p.eval(x).powi(2);
    let segs = fit_adaptive(&integrand, a, b, 1e-14)?;
    // Tail integrals int_x^b, accumulated from the right.
    let mut tails = vec![0.0; segs.len() + 1];
    let antis: Vec<Poly> = segs.iter().map(|s| s.poly.antiderivative()).collect();
    for i in (0..segs.len()).rev() {
        tails[i] = tails[i + 1] + antis[i].eval(segs[i].hi) - antis[i].eval(segs[i].lo);
    }
    let mut out = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        let (anti, hi_val, tail) = (&antis[i], antis[i].eval(s.hi), tails[i + 1]);
        let xi = |x: f64| -p.eval(x) * (hi_val - anti.eval(x) + tail);
        out.extend(fit_adaptive(&xi, s.lo, s.hi, 1e-14)?);
    }
    assemble(out, xi_alpha, 0.0, Smoothness::W2infty)
}

/// Least-squares slope of the lower convex hull of `(ln k, ln |I_k|)`.
pub fn lower_bound_exponent(abs_ik: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = abs_ik
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (((i + 1) as f64).ln(), v.ln()))
        .collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    if hull.len() < 2 {
        return 0.0;
    }
    let n = hull.len() as f64;
    let (mx, my) = (hull.iter().map(|p| p.0).sum::<f64>() / n, hull.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = hull.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = hull.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_profile_meets_end_conditions() {
        let p = PiecewisePoly::polynomial(vec![1.0, 0.3, 0.1]);
        let w = Interval::new(1.0, 2.0).unwrap();
        let xi = boundary_profile(&p, &w, 0.7, &QuadratureRule::default()).unwrap();
        let d = xi.derivative().unwrap();
        assert!((xi.eval(0.5) - 0.7).abs() < 1e-10);
        assert!((xi.eval(1.0) - 0.7).abs() < 1e-9);
        assert!(d.eval(1.0 + 1e-13).abs() < 1e-8 && d.eval(2.0 - 1e-13).abs() < 1e-8);
        assert!(xi.eval(2.0).abs() < 1e-10 && xi.eval(2.5) == 0.0);
    }

    #[test]
    fn hull_slope_of_power_law() {
        let v: Vec<f64> = (1..=30).map(|k| 3.0 / (k as f64).powi(4)).collect();
        assert!((lower_bound_exponent(&v) + 4.0).abs() < 1e-10);
    }
}
