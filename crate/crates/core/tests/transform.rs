use moment_control::funcspace::*;
use moment_control::spectral::*;
use moment_control::transform::*;
use moment_control::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rule() -> QuadratureRule {
    QuadratureRule::default()
}

/// Composite Gauss-Legendre with fixed panels, independent of the adaptive integrator.
fn brute(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let gl = gauss_legendre(20);
    let h = (hi - lo) / panels as f64;
    let mut s = 0.0;
    for i in 0..panels {
        let a = lo + h * i as f64;
        for (x, w) in gl.iter() {
            s += 0.5 * h * w * f(a + 0.5 * h * (x + 1.0));
        }
    }
    s
}

fn bump_jk_oracle(lo: f64, hi: f64, k: usize) -> f64 {
    let len = hi - lo;
    let phi = eigenfunction(k).unwrap();
    0.5 * brute(|x| PI / len * (2.0 * PI * (x - lo) / len).sin() * phi.value(x).powi(2), lo, hi, 400)
}

fn ik_oracle(cp: &CouplingPair, k: usize) -> f64 {
    let phi = eigenfunction(k).unwrap();
    brute(|x| cp.density(x) * phi.value(x).powi(2), 0.0, PI, 4000)
}

#[test]
fn identity_change_is_neutral() {
    let cp = CouplingPair::new(PiecewisePoly::polynomial(vec![0.0, 1.0]), PiecewisePoly::constant(0.5)).unwrap();
    let ch = UnknownChange::identity(Interval::new(1.0, 2.0).unwrap());
    assert_eq!(apply_change(&cp, &ch).unwrap(), cp);
}

#[test]
fn bump_change_with_unit_p() {
    let w = Interval::new(1.2, 1.8).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), PiecewisePoly::zero()).unwrap();
    let ch = bump_change(w, 1.0, Provenance::Bump).unwrap();
    let out = apply_change(&cp, &ch).unwrap();
    for i in 0..=50 {
        let x = w.lo() + w.len() * i as f64 / 50.0;
        let expect = PI / w.len() * (2.0 * PI * (x - w.lo()) / w.len()).sin();
        assert!((out.q(x) - expect).abs() < 1e-10, "x = {x}");
    }
    assert!(out.q(0.5).abs() < 1e-15 && out.q(2.5).abs() < 1e-15);
    let (_, err) = squared_sine_bump(w).unwrap();
    assert!(err <= 1e-10);
}

#[test]
fn bump_shifts_indices_by_closed_form() {
    // q vanishes on the window, so the shift is exactly J_k.
    let w = Interval::new(1.0, 1.0 + std::f64::consts::SQRT_2).unwrap();
    let q = PiecewisePoly::embed(Interval::new(0.0, 0.7).unwrap(), Poly::new(0.0, vec![0.3, 1.0]), Smoothness::Linfty).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), q).unwrap();
    let out = apply_change(&cp, &bump_change(w, 1.0, Provenance::Bump).unwrap()).unwrap();
    for k in 1..=15 {
        let shift = compute_ik(&out, k, &rule()).unwrap().value - compute_ik(&cp, k, &rule()).unwrap().value;
        let jk = jk_closed_form(w.lo(), w.hi(), k).unwrap();
        assert!((shift - jk).abs() < 1e-11 * (1.0 + jk.abs()), "k = {k}: {shift} vs {jk}");
    }
}

#[test]
fn jk_examples() {
    let (a, b) = (1.0, 1.0 + std::f64::consts::SQRT_2);
    let closed = jk_closed_form(a, b, 1).unwrap();
    let oracle = bump_jk_oracle(a, b, 1);
    assert!((closed - oracle).abs() <= 1e-10 * oracle.abs());
    // k (hi - lo) = pi is exactly the resonant length.
    assert!(matches!(jk_closed_form(1.0, 1.0 + PI / 2.0, 2), Err(Error::ResonantMode { k: 2, .. })));
    // Shifting the window by pi / (2k) flips the sign.
    for k in 1..=12 {
        let s = PI / (2.0 * k as f64);
        let (j0, j1) = (jk_closed_form(0.4, 1.3, k).unwrap(), jk_closed_form(0.4 + s, 1.3 + s, k).unwrap());
        assert!((j0 + j1).abs() < 1e-13 && (bump_jk_oracle(0.4 + s, 1.3 + s, k) + bump_jk_oracle(0.4, 1.3, k)).abs() < 1e-12);
    }
}

#[test]
fn jk_matches_quadrature_on_random_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut n = 0;
    while n < 100 {
        let lo = rng.gen_range(0.05..2.5);
        let hi = rng.gen_range(lo + 0.05..PI);
        let k = rng.gen_range(1..=40);
        let Ok(closed) = jk_closed_form(lo, hi, k) else { continue };
        if closed.abs() < 1e-6 {
            continue;
        }
        let oracle = bump_jk_oracle(lo, hi, k);
        assert!((closed - oracle).abs() <= 1e-10 * oracle.abs(), "({lo}, {hi}, {k}): {closed} vs {oracle}");
        n += 1;
    }
}

#[test]
fn choose_kappa_examples() {
    assert_eq!(choose_kappa(&[0.0; 20], 0.0).unwrap(), 1.0);
    let u: Vec<f64> = (1..=20).map(|k| -1.0 / k as f64).collect();
    let kappa = choose_kappa(&u, 0.0).unwrap();
    assert_eq!(kappa, 2.0);
    assert!(u.iter().enumerate().all(|(i, v)| (v + 2.0).abs() >= 1.0 / ((i + 1) as f64).powi(2)));
}

#[test]
fn choose_kappa_on_index_ratios() {
    let w = Interval::new(1.2, 1.9).unwrap();
    let q = PiecewisePoly::embed(Interval::new(0.0, 0.9).unwrap(), Poly::constant(0.4), Smoothness::Linfty).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), q).unwrap();
    let u: Vec<f64> = (1..=50)
        .map(|k| compute_ik(&cp, k, &rule()).unwrap().value / jk_closed_form(w.lo(), w.hi(), k).unwrap())
        .collect();
    let kappa = choose_kappa(&u, *u.last().unwrap()).unwrap();
    for (i, v) in u.iter().enumerate() {
        assert!((v + kappa).abs() >= 1.0 / ((i + 1) as f64).powi(2));
    }
}

#[test]
fn select_ell_examples() {
    let e = select_ell(1.0, 2.0).unwrap();
    assert_eq!(e.n, 2);
    assert!(e.ell > 0.5 && e.ell < 2.0 / 3.0);
    assert!(e.lo > 1.0 && e.hi < 2.0);
    assert!(((e.ell / std::f64::consts::SQRT_2) - e.num as f64 / e.den as f64).abs() < 1e-15);
    let e = select_ell(0.3, 3.0).unwrap();
    assert_eq!(e.n, 1);
    assert!(e.ell > 0.3 && e.ell < 1.5);
    assert!(e.sin_gap > 0.0);
    for j in 1..=100_000usize {
        assert!((e.ell - PI / j as f64).abs() >= 1e-9);
    }
}

#[test]
fn qzero_examples() {
    let omega = Interval::new(1.0, 2.0).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), PiecewisePoly::indicator(Interval::new(0.0, 0.5).unwrap(), 1.0)).unwrap();
    let ch = build_theta_qzero(&cp, &omega).unwrap();
    assert!(ch.is_identity());

    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), PiecewisePoly::constant(1.0)).unwrap();
    let ch = build_theta_qzero(&cp, &omega).unwrap();
    let free = ch.q_free.unwrap();
    let (lo, hi) = (free.lo(), free.hi());
    assert!(ch.window.lo() > 1.0 && ch.window.hi() < 2.0);
    for i in 0..=20 {
        let x = lo + (hi - lo) * i as f64 / 20.0;
        assert!((ch.theta.eval(x) - (-(x - lo)).exp() * ch.theta.eval(lo)).abs() < 1e-12);
    }
    assert_eq!(ch.theta.eval(0.3), 1.0);
    assert_eq!(ch.theta.eval(2.9), 1.0);
}

#[test]
fn qzero_cancels_smooth_coupling() {
    let omega = Interval::new(0.8, 2.2).unwrap();
    let p = PiecewisePoly::polynomial(vec![2.0, -0.5, 0.3]);
    let q = PiecewisePoly::polynomial(vec![0.1, 0.7, -0.2, 0.05]);
    let cp = CouplingPair::new(p, q).unwrap();
    let ch = build_theta_qzero(&cp, &omega).unwrap();
    let out = apply_change(&cp, &ch).unwrap();
    let sup = out.q_poly().sup_norm_on(&ch.q_free.unwrap());
    assert!(sup <= 1e-10, "residual {sup:e}");
    // Budget on index movement.
    let before: Vec<f64> = (1..=30).map(|k| compute_ik(&cp, k, &rule()).unwrap().value).collect();
    let after: Vec<f64> = (1..=30).map(|k| compute_ik(&out, k, &rule()).unwrap().value).collect();
    let budget = 0.5 * before.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    assert!(before.iter().zip(&after).all(|(a, b)| (a - b).abs() <= budget));
}

#[test]
fn no_window_without_p() {
    let cp = CouplingPair::new(PiecewisePoly::zero(), PiecewisePoly::constant(1.0)).unwrap();
    let r = build_theta_qzero(&cp, &Interval::new(1.0, 2.0).unwrap());
    assert!(matches!(r, Err(Error::NoNonvanishingWindow { .. })));
}

#[test]
fn round_trip_and_control_map() {
    let omega = Interval::new(0.8, 2.2).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::polynomial(vec![2.0, -0.5, 0.3]), PiecewisePoly::polynomial(vec![0.1, 0.7])).unwrap();
    for ch in [build_theta_qzero(&cp, &omega).unwrap(), bump_change(Interval::new(1.1, 1.7).unwrap(), 0.8, Provenance::Bump).unwrap()] {
        let there = apply_change(&cp, &ch).unwrap();
        let back = apply_change(&there, &ch.inverse().unwrap()).unwrap();
        assert!(back.p().sub(cp.p()).sup_norm() < 1e-10);
        assert!(back.q_poly().sub(cp.q_poly()).sup_norm() < 1e-10);
        for x in [0.1, 0.5, ch.window.lo() - 0.4, ch.window.hi() + 0.4, 3.0] {
            if x > omega.lo() && x < omega.hi() && (x > ch.window.lo() - 0.5 && x < ch.window.hi() + 0.5) {
                continue;
            }
            let m = ch.control_map(x);
            assert!(m.zeroth.abs() < 1e-12 && m.first.abs() < 1e-12, "x = {x}: {m:?}");
        }
    }
}

#[test]
fn negative_theta_is_rejected() {
    let ch = bump_change(Interval::new(1.0, 2.0).unwrap(), -2.0, Provenance::Bump).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), PiecewisePoly::zero()).unwrap();
    assert!(matches!(apply_change(&cp, &ch), Err(Error::ThetaNotPositive { .. })));
}

#[test]
fn regularize_leaves_good_pairs_alone() {
    let cp = CouplingPair::new(PiecewisePoly::zero(), PiecewisePoly::constant(1.0)).unwrap();
    let (out, trace) = regularize(&cp, &Interval::new(1.0, 2.0).unwrap(), 20).unwrap();
    assert_eq!(out, cp);
    assert!(trace.is_identity());
    assert!(trace.certification.iter().all(|c| c.fixed_by.is_none()));
}

#[test]
fn regularize_constant_p_path() {
    let omega = Interval::new(1.0, 2.0).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), PiecewisePoly::zero()).unwrap();
    let (out, trace) = regularize(&cp, &omega, 30).unwrap();
    let ell = trace.ell.unwrap();
    assert!(ell.lo > 1.0 && ell.hi < 2.0);
    let abs: Vec<f64> = (1..=30).map(|k| ik_oracle(&out, k).abs()).collect();
    assert!(abs.iter().all(|&v| v > 1e-12), "{abs:?}");
    assert!(lower_bound_exponent(&abs) >= -6.0);
    assert!(trace.to_log().contains("ell.n="));
}

#[test]
fn regularize_fixes_a_single_zero_with_a_frequency_bump() {
    let omega = Interval::new(1.0, 2.0).unwrap();
    let left = Interval::new(0.0, 0.8).unwrap();
    let phi2 = eigenfunction(2).unwrap();
    let mass = brute(|x| phi2.value(x).powi(2), 0.0, 0.8, 200);
    let q = PiecewisePoly::indicator(left, 0.5 / mass);
    let cp = CouplingPair::new(PiecewisePoly::polynomial(vec![0.0, 1.0]), q).unwrap();
    assert!(compute_ik(&cp, 2, &rule()).unwrap().value.abs() < 1e-12);
    let (out, trace) = regularize(&cp, &omega, 20).unwrap();
    assert_eq!(trace.bumps.len(), 1);
    assert_eq!(trace.bumps[0].mode, 2);
    assert!(trace.bumps[0].sizing.holds());
    assert_eq!(trace.residual_sets[0], vec![2]);
    for k in 1..=20 {
        let v = ik_oracle(&out, k).abs();
        assert!(v > out.zero_threshold(), "k = {k}: {v:e}");
    }
    let fixed = trace.certification.iter().find(|c| c.k == 2).unwrap();
    assert_eq!(fixed.fixed_by, Some(Provenance::Step2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn select_ell_lands_inside(a in 0.05f64..2.5, gap in 0.05f64..1.0) {
        let b = (a + gap).min(PI);
        let e = select_ell(a, b).unwrap();
        prop_assert!(e.lo > a && e.hi < b);
        prop_assert!(a / ((e.n - 1).max(1) as f64) >= b / (e.n as f64) || e.n == 1);
    }
}
