use std::sync::Arc;

use moment_control::classify::*;
use moment_control::funcspace::*;
use moment_control::spectral::*;
use moment_control::Error;

fn rule() -> QuadratureRule {
    QuadratureRule::default()
}

fn omega() -> Interval {
    Interval::new(1.0, 2.0).unwrap()
}

fn q_one() -> CouplingPair {
    CouplingPair::new(PiecewisePoly::zero(), PiecewisePoly::constant(1.0)).unwrap()
}

fn p_x() -> CouplingPair {
    CouplingPair::new(PiecewisePoly::polynomial(vec![0.0, 1.0]), PiecewisePoly::zero()).unwrap()
}

fn cos2x() -> CouplingPair {
    let s = CosineSeries::new(SeriesExtent::Full, vec![CosineTerm::from_value(1, 1.0)]).unwrap();
    CouplingPair::with_series(PiecewisePoly::zero(), PiecewisePoly::zero(), Some(s)).unwrap()
}

fn surrogate(tau: f64, extent: SeriesExtent) -> CouplingPair {
    let s = CosineSeries::exponential_profile(extent, tau, 40);
    CouplingPair::with_series(PiecewisePoly::zero(), PiecewisePoly::zero(), Some(s)).unwrap()
}

/// q supported on both sides of (1, 2), tuned so that I_2 = I_(a,2) = 0.
/// Left part controls I_(a,2); the right part then cancels the rest.
fn tuned_pair() -> CouplingPair {
    let left = Interval::new(0.0, 0.9).unwrap();
    let right = Interval::new(2.3, PI).unwrap();
    let bump = |iv: Interval, c: Vec<f64>| PiecewisePoly::embed(iv, Poly::new(iv.mid(), c), Smoothness::Linfty).unwrap();
    let l1 = bump(left, vec![1.0]);
    let l2 = bump(left, vec![0.0, 1.0]);
    let r1 = bump(right, vec![1.0]);
    let r2 = bump(right, vec![0.0, 1.0]);
    let idx = |q: &PiecewisePoly, a: f64| {
        let cp = CouplingPair::new(PiecewisePoly::zero(), q.clone()).unwrap();
        compute_iak(&cp, a, 2, &rule()).unwrap().value
    };
    // Unknowns (c_l, c_r): rows are I_(a,2) = 0 and I_2 = 0.
    let a = 1.0;
    let m = [[idx(&l2, a), idx(&r2, a)], [idx(&l2, PI), idx(&r2, PI)]];
    let rhs = [-(idx(&l1, a) + idx(&r1, a)), -(idx(&l1, PI) + idx(&r1, PI))];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let cl = (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det;
    let cr = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
    let q = l1.add(&l2.scale(cl)).add(&r1).add(&r2.scale(cr));
    CouplingPair::new(PiecewisePoly::zero(), q).unwrap()
}

#[test]
fn distributed_verdicts() {
    let zero = CouplingPair::zero();
    assert_eq!(approx_distributed(&zero, &omega(), 10, &rule()).unwrap(), Verdict::No { witness: 1 });
    assert_eq!(approx_distributed(&q_one(), &omega(), 10, &rule()).unwrap(), Verdict::Yes);
    assert_eq!(approx_distributed(&tuned_pair(), &omega(), 10, &rule()).unwrap(), Verdict::No { witness: 2 });
}

#[test]
fn cutoff_cosine_verdict_follows_index_tables() {
    let w = Interval::new(2.8, 3.0).unwrap();
    let cutoff = Interval::new(0.0, 2.5).unwrap();
    let fit = chebyshev_fit(|x| (2.0 * x).cos(), 0.0, 2.5, 30);
    assert!(fit.sup_error < 1e-12);
    let q = PiecewisePoly::embed(cutoff, fit.poly, Smoothness::Linfty).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::zero(), q).unwrap();
    let k_max = 12;
    let eps = cp.zero_threshold();
    let oracle_fail = (1..=k_max).find(|&k| {
        let phi = eigenfunction(k).unwrap();
        let f = |b: f64| integrate_fn(|x| if x < 2.5 { (2.0 * x).cos() * phi.value(x).powi(2) } else { 0.0 }, 0.0, b, &[2.5], 2.0 * k as f64, &rule()).unwrap().value;
        f(PI).abs() + f(2.8).abs() <= eps
    });
    let v = approx_distributed(&cp, &w, k_max, &rule()).unwrap();
    match oracle_fail {
        Some(k) => assert_eq!(v, Verdict::No { witness: k }),
        None => assert_ne!(v, Verdict::No { witness: 1 }),
    }
}

#[test]
fn boundary_verdicts() {
    assert_eq!(approx_boundary(&q_one(), 10, &rule()).unwrap(), Verdict::Yes);
    assert_eq!(approx_boundary(&cos2x(), 10, &rule()).unwrap(), Verdict::No { witness: 2 });
    assert_eq!(approx_boundary(&p_x(), 10, &rule()).unwrap(), Verdict::Yes);
    assert_eq!(Verdict::No { witness: 2 }.exit_code(), 2);
    assert_eq!(Verdict::InconclusiveBeyondK.exit_code(), 3);
}

#[test]
fn zero_limit_is_inconclusive() {
    // I_k = exp(-k^2 tau) never vanishes but its limit does.
    let cp = surrogate(0.2, SeriesExtent::Full);
    assert_eq!(approx_boundary(&cp, 20, &rule()).unwrap(), Verdict::InconclusiveBeyondK);
}

#[test]
fn minimal_time_examples() {
    let t = estimate_t0(&q_one(), 1.0, 20, &rule()).unwrap();
    assert!(t.value.abs() < 1e-12);
    let t = estimate_t1(&q_one(), 20, &rule()).unwrap();
    assert!(t.value.abs() < 1e-12);
    for k_max in [8usize, 16, 32] {
        let t = estimate_t0(&p_x(), 1.0, k_max, &rule()).unwrap();
        let bound = (-(0.5f64 / 2.0).ln() + 1.0) / ((k_max / 2) as f64).powi(2);
        assert!(t.value <= bound, "K={k_max}: {} > {bound}", t.value);
        let t1 = estimate_t1(&p_x(), k_max, &rule()).unwrap();
        let r = t1.table.iter().find(|r| r.k == 3).unwrap();
        assert!((r.ratio - 2f64.ln() / 9.0).abs() < 1e-12);
    }
}

#[test]
fn surrogate_ratios_are_exact_and_independent_of_k() {
    for &tau in &[0.2, 0.4, 0.5] {
        for extent in [SeriesExtent::Full, SeriesExtent::Half] {
            let cp = surrogate(tau, extent);
            for k_max in [10usize, 25, 40] {
                // The whole support must sit left of `a` for the closed form to apply.
                let a = if extent == SeriesExtent::Full { PI } else { 2.0 };
                let t0 = estimate_t0(&cp, a, k_max, &rule()).unwrap();
                let t1 = estimate_t1(&cp, k_max, &rule()).unwrap();
                assert!((t0.value - tau).abs() < 1e-9 && (t1.value - tau).abs() < 1e-9);
                assert!(t0.table.iter().all(|r| (r.ratio - tau).abs() < 1e-9));
            }
        }
    }
}

#[test]
fn t0_never_exceeds_t1() {
    for cp in [p_x(), q_one(), tuned_pair().scaled(1.0).unwrap(), surrogate(0.3, SeriesExtent::Half)] {
        let table = IndexTable::compute(&cp, 1.0, 16, &rule()).unwrap();
        if let (Ok(t0), Ok(t1)) = (t0_from_table(&table, RATIO_CAP), t1_from_table(&table, RATIO_CAP)) {
            assert!(t0.value <= t1.value + 1e-12);
            for (a, b) in t0.table.iter().zip(&t1.table) {
                assert!(a.ratio <= b.ratio + 1e-12);
            }
        }
    }
}

#[test]
fn failing_modes_break_the_estimator() {
    let r = estimate_t0(&CouplingPair::zero(), 1.0, 8, &rule());
    assert!(matches!(r, Err(Error::FailedPrecondition { .. })));
}

#[test]
fn growing_ratios_are_reported_as_infinite() {
    // Synthetic table with ratios 10 k, beyond the cap and increasing.
    let ik: Vec<CouplingIndex> = (1..=16).map(|k| CouplingIndex::approximate((-10.0 * (k * k * k) as f64).exp().max(1e-300), 0.0)).collect();
    let mut table = IndexTable { a: PI, ik: ik.clone(), iak: ik, zero_threshold: 0.0 };
    for (k, v) in table.ik.iter_mut().enumerate() {
        v.ln_abs = -10.0 * ((k + 1) as f64).powi(3);
    }
    table.iak = table.ik.clone();
    let t = t1_from_table(&table, RATIO_CAP).unwrap();
    assert!(t.value.is_infinite());
}

#[test]
fn fattorini_witnesses() {
    let zero = Arc::new(CouplingPair::zero());
    let w = fattorini_witness(&zero, &omega(), 1, &rule()).unwrap().unwrap();
    assert!(w.verified && w.first_component_sup <= 1e-8);
    let one = Arc::new(q_one());
    for k in 1..=5 {
        assert!(fattorini_witness(&one, &omega(), k, &rule()).unwrap().is_none());
    }
    let tuned = Arc::new(tuned_pair());
    let w = fattorini_witness(&tuned, &omega(), 2, &rule()).unwrap().unwrap();
    assert!(w.verified, "{}", w.first_component_sup);
    assert!(fattorini_witness(&tuned, &omega(), 3, &rule()).unwrap().is_none());
}

#[test]
fn dichotomy_is_coherent() {
    for cp in [CouplingPair::zero(), tuned_pair(), surrogate(0.2, SeriesExtent::Half)] {
        let w = Interval::new(2.0, 2.2).unwrap();
        let w = if cp.avoids(&omega()) { omega() } else { w };
        let v = approx_distributed(&cp, &w, 8, &rule()).unwrap();
        let arc = Arc::new(cp);
        for k in 1..=8 {
            let wit = fattorini_witness(&arc, &w, k, &rule()).unwrap();
            let is_witness = matches!(v, Verdict::No { witness } if witness == k);
            if is_witness {
                assert!(wit.is_some());
            }
        }
        if let Verdict::No { witness } = v {
            let earlier: Vec<usize> = (1..witness).filter(|&k| fattorini_witness(&arc, &w, k, &rule()).unwrap().is_some()).collect();
            assert!(earlier.is_empty());
        }
    }
}

#[test]
fn report_renders_key_values() {
    let r = classify(&p_x(), &omega(), 12, &rule()).unwrap();
    let text = r.to_text();
    assert!(text.contains("approx_distributed=yes"));
    assert!(text.contains("approx_boundary=yes"));
    assert!(text.contains("T0_estimate="));
}
