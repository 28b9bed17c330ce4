//! Acceptance suite: one PASS/FAIL line per criterion, with runtime budgets.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use astro_float::{BigFloat, Consts, RoundingMode};
use moment_control::biortho::build_family;
use moment_control::classify::{classify, estimate_t0, estimate_t1, fattorini_witness, Verdict};
use moment_control::cli::{quotient, synthesize, tuned_coupling, verify, Overrides, RunConfig};
use moment_control::funcspace::{gauss_legendre, Interval, PiecewisePoly, QuadratureRule, PI};
use moment_control::spectral::{build_records, CosineSeries, CouplingPair, SeriesExtent, SpectralOptions};
use moment_control::transform::{jk_closed_form, lower_bound_exponent, regularize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rule() -> QuadratureRule {
    QuadratureRule::default()
}

fn config(name: &str) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    RunConfig::load(&path, &Overrides::default()).expect("checked-in config")
}

fn out_dir(tag: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(tag)
}

fn key(dir: &Path, file: &str, name: &str) -> f64 {
    let text = fs::read_to_string(dir.join(file)).expect("report file");
    let prefix = format!("{name}=");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn eigen_structure() -> Check {
    let omega = Interval::new(1.0, 2.0).unwrap();
    let q_one = CouplingPair::new(PiecewisePoly::zero(), PiecewisePoly::constant(1.0)).unwrap();
    let p_x = CouplingPair::new(PiecewisePoly::polynomial(vec![0.0, 1.0]), PiecewisePoly::zero()).unwrap();
    let mut worst: f64 = 0.0;
    let mut orth: f64 = 0.0;
    for cp in [q_one, p_x] {
        for r in build_records(&Arc::new(cp), &omega, 30, &SpectralOptions::default()).unwrap() {
            worst = worst.max(r.eigen_residual());
            orth = orth.max(r.orthogonality.abs());
        }
    }
    ensure(worst <= 1e-8 && orth <= 1e-8, format!("max eigen-residual {worst:.2e}, max <psi*_k, phi_k> {orth:.2e}"))
}

fn biorthogonality() -> Check {
    let fam = build_family(8, 1.0, 1e-8).unwrap();
    let one = build_family(1, 1.0, 1e-12).unwrap();
    // Gram system of {e^(-t), t e^(-t)} on (0, 1), inverted by hand.
    let x = 2.0f64;
    let ex = (-x).exp();
    let g00 = (1.0 - ex) / x;
    let g01 = (1.0 - (1.0 + x) * ex) / (x * x);
    let g11 = (2.0 - (2.0 + 2.0 * x + x * x) * ex) / (x * x * x);
    let det = g00 * g11 - g01 * g01;
    let hand = [[g11 / det, -g01 / det], [-g01 / det, g00 / det]];
    let mut rel: f64 = 0.0;
    for j in 1..=2 {
        let c = one.coefficients_f64(j, 1);
        for i in 0..2 {
            rel = rel.max((c[i] - hand[i][j - 1]).abs() / hand[i][j - 1].abs());
        }
    }
    ensure(fam.max_residual <= 1e-8 && rel <= 1e-12, format!("K=8 residual {:.2e}, K=1 relative gap {rel:.2e}", fam.max_residual))
}

/// `(1/2) int (pi / len) sin(2 pi (x - lo) / len) phi_k(x)^2 dx` by composite
/// Gauss-Legendre with the integrand in 128-bit arithmetic; small values
/// come from heavy cancellation, which double precision cannot resolve.
fn bump_integral_oracle(lo: f64, hi: f64, k: usize, consts: &mut Consts) -> f64 {
    const P: usize = 128;
    let rm = RoundingMode::ToEven;
    let num = |x: f64| BigFloat::from_f64(x, P);
    let pi = consts.pi(P, rm);
    let (blo, len) = (num(lo), num(hi).sub(&num(lo), P, rm));
    let panels = 24;
    let h = len.div(&num(panels as f64), P, rm);
    let freq = pi.mul(&num(2.0), P, rm).div(&len, P, rm);
    let kk = num(k as f64);
    let mut sum = num(0.0);
    for i in 0..panels {
        let a = blo.add(&h.mul(&num(i as f64), P, rm), P, rm);
        for (x, w) in gauss_legendre(20).iter() {
            let y = a.add(&h.mul(&num(0.5 * (x + 1.0)), P, rm), P, rm);
            let bump = freq.mul(&y.sub(&blo, P, rm), P, rm).sin(P, rm, consts);
            let s = kk.mul(&y, P, rm).sin(P, rm, consts);
            let term = bump.mul(&s, P, rm).mul(&s, P, rm).mul(&num(*w), P, rm);
            sum = sum.add(&term, P, rm);
        }
    }
    // 0.5 * (h / 2) * (pi / len) * (2 / pi) = h / (2 len)
    let scale = h.div(&len.mul(&num(2.0), P, rm), P, rm);
    let v = sum.mul(&scale, P, rm);
    v.to_string().parse().expect("decimal")
}

fn bump_integral_closed_form() -> Check {
    let mut consts = Consts::new().expect("multiprecision constants");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut n, mut worst): (usize, f64) = (0, 0.0);
    while n < 100 {
        let lo = rng.gen_range(0.05..2.5);
        let hi = rng.gen_range(lo + 0.05..PI);
        let k = rng.gen_range(1..=40);
        let Ok(closed) = jk_closed_form(lo, hi, k) else { continue };
        if closed.abs() < 1e-6 {
            continue;
        }
        let oracle = bump_integral_oracle(lo, hi, k, &mut consts);
        worst = worst.max((closed - oracle).abs() / oracle.abs());
        n += 1;
    }
    ensure(worst <= 1e-10, format!("max relative error {worst:.2e} over {n} samples"))
}

fn distributed_null_control() -> Check {
    let cfg = config("distributed");
    let dir = out_dir("distributed");
    synthesize(&cfg, &dir).map_err(|e| e.to_string())?;
    let out = verify(&cfg, &dir.join("control.json"), &dir).map_err(|e| e.to_string())?;
    let ratio = key(&dir, "verify.txt", "ratio");
    ensure(out.exit_code == 0 && ratio <= 1e-3, format!("||y(T)||/||y0|| = {ratio:.3e} (threshold 1e-3)"))
}

fn boundary_null_control() -> Check {
    let cfg = config("boundary-q1");
    let dir = out_dir("boundary");
    synthesize(&cfg, &dir).map_err(|e| e.to_string())?;
    verify(&cfg, &dir.join("control.json"), &dir).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(dir.join("duality_residuals.csv")).unwrap();
    let rows: Vec<[f64; 2]> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let c: Vec<f64> = l.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
            [c[0], c[1]]
        })
        .collect();
    let worst = rows.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    ensure(rows.len() == 6 && worst <= 1e-5, format!("max duality residual {worst:.2e} over {} modes", rows.len()))
}

fn minimal_time_estimator() -> Check {
    let mut worst: f64 = 0.0;
    for tau in [0.2, 0.5] {
        for extent in [SeriesExtent::Full, SeriesExtent::Half] {
            let s = CosineSeries::exponential_profile(extent, tau, 40);
            let cp = CouplingPair::with_series(PiecewisePoly::zero(), PiecewisePoly::zero(), Some(s)).unwrap();
            let a = if extent == SeriesExtent::Full { PI } else { 2.0 };
            let t0 = estimate_t0(&cp, a, 40, &rule()).unwrap().value;
            let t1 = estimate_t1(&cp, 40, &rule()).unwrap().value;
            worst = worst.max((t0 - tau).abs()).max((t1 - tau).abs());
        }
    }
    ensure(worst <= 1e-6, format!("max |estimate - tau| {worst:.2e}"))
}

fn negative_time_evidence() -> Check {
    let short = config("surrogate-short");
    let long = config("surrogate-long");
    let (ds, dl) = (out_dir("quotient-short"), out_dir("quotient-long"));
    quotient(&short, &ds).map_err(|e| e.to_string())?;
    quotient(&long, &dl).map_err(|e| e.to_string())?;
    let growth = key(&ds, "quotient.txt", "growth");
    let spread = key(&dl, "quotient.txt", "max_ratio_to_first");
    ensure(growth >= 10.0 && spread <= 3.0, format!("T = tau/2 growth {growth:.2e}; T = 2 tau max ratio to k=10 {spread:.2e}"))
}

fn approximate_controllability() -> Check {
    let omega = Interval::new(1.0, 2.0).unwrap();
    let zero = Arc::new(CouplingPair::zero());
    let q_one = CouplingPair::new(PiecewisePoly::zero(), PiecewisePoly::constant(1.0)).unwrap();
    let tuned = Arc::new(tuned_coupling().unwrap());
    let v_zero = classify(&zero, &omega, 10, &rule()).unwrap().approx_controllable_distributed;
    let v_one = classify(&q_one, &omega, 10, &rule()).unwrap().approx_controllable_distributed;
    let v_tuned = classify(&tuned, &omega, 10, &rule()).unwrap().approx_controllable_distributed;
    let w_zero = fattorini_witness(&zero, &omega, 1, &rule()).unwrap().map_or(f64::INFINITY, |w| w.first_component_sup);
    let w_tuned = fattorini_witness(&tuned, &omega, 2, &rule()).unwrap().map_or(f64::INFINITY, |w| w.first_component_sup);
    let ok = v_zero == Verdict::No { witness: 1 } && v_one == Verdict::Yes && v_tuned == Verdict::No { witness: 2 } && w_zero <= 1e-8;
    ensure(ok, format!("zero: {v_zero} (sup {w_zero:.1e}); q=1: {v_one}; tuned: {v_tuned} (sup {w_tuned:.1e})"))
}

fn regularization_pipeline() -> Check {
    let omega = Interval::new(1.0, 2.0).unwrap();
    let cp = CouplingPair::new(PiecewisePoly::constant(1.0), PiecewisePoly::zero()).unwrap();
    let before = (1..=30).map(|k| moment_control::spectral::compute_ik(&cp, k, &rule()).unwrap().value.abs()).fold(0.0, f64::max);
    let (out, trace) = regularize(&cp, &omega, 30).map_err(|e| e.to_string())?;
    let tight = QuadratureRule::with_tol(1e-14);
    let abs: Vec<f64> = (1..=30).map(|k| moment_control::spectral::compute_ik(&out, k, &tight).unwrap().value.abs()).collect();
    let min = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let exponent = lower_bound_exponent(&abs);
    let inside = trace.window.is_none_or(|w| w.lo() >= omega.lo() && w.hi() <= omega.hi());
    ensure(
        before <= 1e-12 && min > out.zero_threshold() && exponent >= -6.0 && inside,
        format!("initial max |I_k| {before:.1e}; final min |I_k| {min:.3e}; lower-bound exponent {exponent:.3}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("eigen-structure residuals", Duration::from_secs(30), eigen_structure),
        ("biorthogonal family", Duration::from_secs(5), biorthogonality),
        ("closed-form bump integral", Duration::from_secs(10), bump_integral_closed_form),
        ("distributed null control", Duration::from_secs(120), distributed_null_control),
        ("boundary null control", Duration::from_secs(60), boundary_null_control),
        ("minimal-time estimator", Duration::from_secs(10), minimal_time_estimator),
        ("negative-time quotient trend", Duration::from_secs(60), negative_time_evidence),
        ("approximate-controllability dichotomy", Duration::from_secs(30), approximate_controllability),
        ("regularization pipeline", Duration::from_secs(60), regularization_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "acceptance {} {}: {name}: {detail} [{:.2}s / {}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance summary: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
