use moment_control::funcspace::*;
use moment_control::Error;
use proptest::prelude::*;

fn rule() -> QuadratureRule {
    QuadratureRule::default()
}

#[test]
fn integrates_trivial_examples() {
    let one = PiecewisePoly::constant(1.0);
    let v = integrate(&one, Interval::full(), &rule()).unwrap();
    assert!((v.value - PI).abs() < 1e-14);

    let s = integrate_fn(f64::sin, 0.0, PI, &[], 1.0, &rule()).unwrap();
    assert!((s.value - 2.0).abs() < 1e-14);
    assert!(s.error <= 1e-12);

    let ind = PiecewisePoly::indicator(Interval::new(0.0, 1.0).unwrap(), 1.0);
    let v = integrate(&ind, Interval::full(), &rule()).unwrap();
    assert!((v.value - 1.0).abs() < 1e-15);
}

#[test]
fn eigenfunctions_are_orthonormal() {
    assert!(eigenfunction(0).is_err());
    let phi2 = eigenfunction(2).unwrap();
    assert!((phi2.value(PI / 4.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
    let n = 50;
    for k in 1..=n {
        for l in k..=n {
            let (a, b) = (eigenfunction(k).unwrap(), eigenfunction(l).unwrap());
            let g = integrate_fn(|x| a.value(x) * b.value(x), 0.0, PI, &[], (k + l) as f64, &rule()).unwrap();
            let expect = if k == l { 1.0 } else { 0.0 };
            assert!((g.value - expect).abs() < 1e-10, "G[{k},{l}] = {}", g.value);
        }
    }
}

#[test]
fn derivative_examples() {
    let x = PiecewisePoly::polynomial(vec![0.0, 1.0]);
    let d = x.derivative().unwrap();
    for t in [0.0, 1.0, 3.0] {
        assert!((d.eval(t) - 1.0).abs() < 1e-14);
    }
    let c = PiecewisePoly::constant(2.5).derivative().unwrap();
    assert!(c.is_zero());

    let f = PiecewisePoly::from_global(
        vec![0.0, 1.0, PI],
        vec![vec![0.0, 0.0, 1.0], vec![-1.0, 2.0]],
        Smoothness::W1infty,
    )
    .unwrap();
    let d = f.derivative().unwrap();
    assert_eq!(d.smoothness(), Smoothness::Linfty);
    assert!((d.eval(0.5) - 1.0).abs() < 1e-14);
    assert!((d.eval(2.0) - 2.0).abs() < 1e-14);
    assert!(matches!(d.derivative(), Err(Error::InsufficientSmoothness(_))));
}

#[test]
fn rejects_discontinuity_for_sobolev_class() {
    let r = PiecewisePoly::from_global(vec![0.0, 1.0, PI], vec![vec![0.0], vec![1.0]], Smoothness::W1infty);
    assert!(r.is_err());
    let ok = PiecewisePoly::from_global(vec![0.0, 1.0, PI], vec![vec![0.0], vec![1.0]], Smoothness::Linfty);
    assert!(ok.is_ok());
}

#[test]
fn rejects_bad_breakpoints_and_intervals() {
    assert!(PiecewisePoly::from_global(vec![0.0, 2.0], vec![vec![1.0]], Smoothness::Linfty).is_err());
    assert!(PiecewisePoly::from_global(vec![0.0, 2.0, 1.0, PI], vec![vec![1.0]; 3], Smoothness::Linfty).is_err());
    assert!(Interval::new(1.0, 1.0).is_err());
    assert!(Interval::new(-0.1, 1.0).is_err());
    assert!(Interval::new(0.0, 4.0).is_err());
}

#[test]
fn spec_round_trips_exactly() {
    let f = PiecewisePoly::from_global(
        vec![0.0, 0.7, 2.0, PI],
        vec![vec![0.0, 1.0], vec![0.7, 0.3, -0.2], vec![1.0]],
        Smoothness::Linfty,
    )
    .unwrap();
    let text = toml::to_string(&f).unwrap();
    let back: PiecewisePoly = toml::from_str(&text).unwrap();
    assert_eq!(f, back);
}

#[test]
fn degree_31_is_integrated_exactly() {
    let coeffs: Vec<f64> = (0..=31).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let f = PiecewisePoly::from_global(vec![0.0, 1.0, PI], vec![coeffs.clone(), vec![0.0]], Smoothness::Linfty).unwrap();
    let exact: f64 = coeffs.iter().enumerate().map(|(i, c)| c / (i as f64 + 1.0)).sum();
    let v = integrate(&f, Interval::new(0.0, 1.0).unwrap(), &rule()).unwrap();
    assert!((v.value - exact).abs() <= 1e-13 * exact);
}

#[test]
fn unconverged_integral_is_reported() {
    let strict = QuadratureRule { max_depth: 2, tol: 1e-14, ..rule() };
    let r = integrate_fn(|x: f64| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, &[], 0.0, &strict);
    assert!(matches!(r, Err(Error::NonConvergedQuadrature { .. })));
}

#[test]
fn products_and_supports() {
    let bump = PiecewisePoly::embed(
        Interval::new(1.0, 2.0).unwrap(),
        Poly::new(1.5, vec![0.25, 0.0, -1.0]),
        Smoothness::W1infty,
    )
    .unwrap();
    assert_eq!(bump.support(), vec![Interval::new(1.0, 2.0).unwrap()]);
    let x = PiecewisePoly::polynomial(vec![0.0, 1.0]);
    let prod = bump.mul(&x);
    for t in [0.5, 1.2, 1.9, 2.5] {
        assert!((prod.eval(t) - bump.eval(t) * t).abs() < 1e-14);
    }
    assert!(bump.vanishes_on(&Interval::new(2.0, 3.0).unwrap()));
    assert!(!bump.vanishes_on(&Interval::new(1.5, 3.0).unwrap()));
    assert!((bump.sup_norm() - 0.25).abs() < 1e-12);
}

proptest! {
    #[test]
    fn integral_is_additive(c0 in -2.0..2.0f64, c1 in -2.0..2.0f64, c2 in -2.0..2.0f64, b in 0.2..2.9f64) {
        let f = PiecewisePoly::from_global(vec![0.0, b, PI], vec![vec![c0, c1, c2], vec![c1, c0]], Smoothness::Linfty).unwrap();
        let r = rule();
        let whole = integrate(&f, Interval::new(0.1, 3.0).unwrap(), &r).unwrap().value;
        let split = if b > 0.1 && b < 3.0 {
            integrate(&f, Interval::new(0.1, b).unwrap(), &r).unwrap().value
                + integrate(&f, Interval::new(b, 3.0).unwrap(), &r).unwrap().value
        } else { whole };
        prop_assert!((whole - split).abs() <= 1e-12);
    }

    #[test]
    fn arithmetic_matches_pointwise(a in -3.0..3.0f64, b in -3.0..3.0f64, x in 0.0..PI) {
        let f = PiecewisePoly::polynomial(vec![a, 1.0, b]);
        let g = PiecewisePoly::from_global(vec![0.0, 1.3, PI], vec![vec![b, -a], vec![b - 1.3 * a]], Smoothness::W1infty).unwrap();
        prop_assert!((f.add(&g).eval(x) - (f.eval(x) + g.eval(x))).abs() < 1e-12);
        prop_assert!((f.sub(&g).eval(x) - (f.eval(x) - g.eval(x))).abs() < 1e-12);
        prop_assert!((f.mul(&g).eval(x) - f.eval(x) * g.eval(x)).abs() < 1e-11);
    }
}
