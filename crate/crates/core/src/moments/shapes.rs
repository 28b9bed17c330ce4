//! Control profiles supported in the control region, with the coefficient
//! tables the moment problem needs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{Interval, PanelGrid, PiecewisePoly, Poly, SineMode, Smoothness, SINE_NORM};
use crate::spectral::SpectralRecord;

const MAX_ATTEMPTS: usize = 10;
/// Fitted lower constants must reach this fraction of the table scale.
const BOUND_FRACTION: f64 = 1e-3;

/// `f^(1)`, `f^(2)` and their tables for `k = 1..=K`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeFunctions {
    pub omega: Interval,
    pub profiles: [PiecewisePoly; 2],
    pub supports: [Interval; 2],
    /// `int f phi_k`.
    pub sine: [Vec<f64>; 2],
    /// `int f cos(k x)`.
    pub cosine: [Vec<f64>; 2],
    /// `int f psi*_k`.
    pub adjoint: [Vec<f64>; 2],
    /// `cosine[0] sine[1] - cosine[1] sine[0]`.
    pub b: Vec<f64>,
    /// `min_k k^3 min(|f_k^(1)|, |f_k^(2)|)`.
    pub c1: f64,
    /// `min_k k^5 |B_k|`.
    pub c2: f64,
    pub attempts: usize,
}

impl ShapeFunctions {
    pub fn k_max(&self) -> usize {
        self.b.len()
    }

    /// Sine coefficients of both profiles for `k = 1..=n`, from the tables
    /// and by quadrature beyond them.
    pub fn sine_loads(&self, n: usize) -> [Vec<f64>; 2] {
        let mut out = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for (i, o) in out.iter_mut().enumerate() {
            let s = &self.sine[i];
            o.extend(s.iter().take(n).copied());
            if n > s.len() {
                let support = self.supports[i];
                let grid = PanelGrid::new(support.lo(), support.hi(), &[], (support.len() / 16.0).min(3.0 / n as f64), 20);
                o.extend((s.len() + 1..=n).map(|k| {
                    let phi = SineMode::new_unchecked(k);
                    grid.integrate(|x| self.profiles[i].eval(x) * phi.value(x))
                }));
            }
        }
        out
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        self.profiles[i - 1].eval(x)
    }
}

/// `((x - lo)(hi - x))^2` on `support`, zero elsewhere.
pub fn quartic_bump(support: Interval) -> Result<PiecewisePoly> {
    let h = 0.5 * support.len();
    let h2 = h * h;
    let inner = Poly::new(support.mid(), vec![h2 * h2, 0.0, -2.0 * h2, 0.0, 1.0]);
    PiecewisePoly::embed(support, inner, Smoothness::W1infty)
}

fn candidate_supports(omega: &Interval, attempt: usize, rng: &mut ChaCha8Rng) -> Result<[Interval; 2]> {
    let (lo, len) = (omega.lo(), omega.len());
    let (half, start, width) = if attempt == 0 {
        (0.45, 0.08, 0.5)
    } else {
        (rng.gen_range(0.3..0.49), rng.gen_range(0.02..0.2), rng.gen_range(0.3..0.6))
    };
    let centered = Interval::new(omega.mid() - half * len, omega.mid() + half * len)?;
    let off = Interval::new(lo + start * len, lo + (start + width).min(0.98) * len)?;
    Ok([centered, off])
}

fn mass_of(profile: &PiecewisePoly, support: &Interval) -> f64 {
    PanelGrid::new(support.lo(), support.hi(), &[], support.len() / 4.0, 12).integrate(|x| profile.eval(x).abs())
}

fn tables(profile: &PiecewisePoly, support: &Interval, records: &[SpectralRecord]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k_max = records.len();
    let width = (support.len() / 16.0).min(std::f64::consts::PI / (k_max as f64 + 1.0));
    let grid = PanelGrid::new(support.lo(), support.hi(), &[], width, 20);
    let vals: Vec<f64> = grid.nodes.iter().map(|&x| profile.eval(x)).collect();
    let mut sine = Vec::with_capacity(k_max);
    let mut cosine = Vec::with_capacity(k_max);
    let mut adjoint = Vec::with_capacity(k_max);
    for r in records {
        let phi = SineMode::new_unchecked(r.k);
        let kf = r.k as f64;
        let (mut s, mut c, mut a) = (0.0, 0.0, 0.0);
        for ((&x, &w), &v) in grid.nodes.iter().zip(&grid.weights).zip(&vals) {
            s += w * v * phi.value(x);
            c += w * v * (kf * x).cos();
            a += w * v * r.psi_star.value(x);
        }
        sine.push(s);
        cosine.push(c);
        adjoint.push(a);
    }
    (sine, cosine, adjoint)
}

/// Profiles whose tables satisfy the lower bounds `c1/k^3` and `c2/k^5` on
/// every computed mode. The first attempt is deterministic; later attempts
/// draw new supports from `seed`.
pub fn build_shapes(omega: &Interval, records: &[SpectralRecord], seed: u64) -> Result<ShapeFunctions> {
    if records.is_empty() {
        return Err(Error::InvalidInput("need at least one spectral record".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failing = Vec::new();
    for attempt in 0..MAX_ATTEMPTS {
        let supports = candidate_supports(omega, attempt, &mut rng)?;
        let profiles = [quartic_bump(supports[0])?, quartic_bump(supports[1])?];
        let (s1, c1t, a1) = tables(&profiles[0], &supports[0], records);
        let (s2, c2t, a2) = tables(&profiles[1], &supports[1], records);
        let b: Vec<f64> = (0..records.len()).map(|i| c1t[i] * s2[i] - c2t[i] * s1[i]).collect();

        // Each table is tested against its own envelope: the mass bound for
        // low modes, the fitted asymptotic bound for high ones.
        let mass = [mass_of(&profiles[0], &supports[0]), mass_of(&profiles[1], &supports[1])];
        let n = records.len();
        let kp = |i: usize, p: i32| (i as f64 + 1.0).powi(p);
        let upper = (0..n).map(|i| kp(i, 3) * s1[i].abs().max(s2[i].abs())).fold(0.0, f64::max);
        let lower: Vec<f64> = (0..n).map(|i| kp(i, 3) * s1[i].abs().min(s2[i].abs())).collect();
        let scaled_b: Vec<f64> = (0..n).map(|i| kp(i, 5) * b[i].abs()).collect();
        let b_scale = scaled_b.iter().copied().fold(0.0, f64::max);
        let sine_env = |i: usize, m: f64| (SINE_NORM * m).min(upper / kp(i, 3));
        let b_env = |i: usize| (SINE_NORM * mass[0] * mass[1]).min(b_scale / kp(i, 5));
        let weak = |i: usize| {
            s1[i].abs() < BOUND_FRACTION * sine_env(i, mass[0])
                || s2[i].abs() < BOUND_FRACTION * sine_env(i, mass[1])
                || b[i].abs() < BOUND_FRACTION * b_env(i)
        };

        failing = (0..n).filter(|&i| weak(i)).map(|i| i + 1)
            .collect();
        if failing.is_empty() {
            return Ok(ShapeFunctions {
                omega: *omega,
                profiles,
                supports,
                sine: [s1, s2],
                cosine: [c1t, c2t],
                adjoint: [a1, a2],
                b,
                c1: lower.iter().copied().fold(f64::INFINITY, f64::min),
                c2: scaled_b.iter().copied().fold(f64::INFINITY, f64::min),
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::ShapeSearchFailed { attempts: MAX_ATTEMPTS, modes: failing })
}
