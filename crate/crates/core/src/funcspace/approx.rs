use super::Poly;

/// Polynomial approximant with its sampled sup-norm error.
#[derive(Clone, Debug, PartialEq)]
pub struct Approximant {
    pub poly: Poly,
    pub sup_error: f64,
}

/// Chebyshev-Lobatto interpolant of `f` on `[lo, hi]`, expanded about the midpoint.
///
/// The interpolant reproduces `f` exactly at both endpoints. The reported
/// error is the maximum deviation over a sampling much denser than the nodes.
pub fn chebyshev_fit(f: impl Fn(f64) -> f64, lo: f64, hi: f64, degree: usize) -> Approximant {
    let n = degree.max(1);
    let mid = 0.5 * (lo + hi);
    let rad = 0.5 * (hi - lo);
    let pi = std::f64::consts::PI;
    let vals: Vec<f64> = (0..=n).map(|j| f(mid + rad * (pi * j as f64 / n as f64).cos())).collect();

    let mut cheb = vec![0.0; n + 1];
    for (m, c) in cheb.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, &v) in vals.iter().enumerate() {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            s += w * v * (pi * (m * j) as f64 / n as f64).cos();
        }
        *c = 2.0 * s / n as f64;
    }
    cheb[0] *= 0.5;
    cheb[n] *= 0.5;

    // Monomial coefficients in s = (x - mid) / rad.
    let mut mono = vec![0.0; n + 1];
    let mut t_prev = vec![0.0; n + 1];
    let mut t_cur = vec![0.0; n + 1];
    t_prev[0] = 1.0;
    if n >= 1 {
        t_cur[1] = 1.0;
    }
    mono[0] += cheb[0];
    for m in 1..=n {
        if m > 1 {
            let mut next = vec![0.0; n + 1];
            for i in 0..n {
                next[i + 1] += 2.0 * t_cur[i];
            }
            for i in 0..=n {
                next[i] -= t_prev[i];
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
        for i in 0..=n {
            mono[i] += cheb[m] * t_cur[i];
        }
    }
    let mut scale = 1.0;
    for c in mono.iter_mut() {
        *c *= scale;
        scale /= rad;
    }
    let poly = Poly::new(mid, mono);

    let samples = 40 * (n + 1);
    let sup_error = (0..=samples)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / samples as f64;
            (poly.eval(x) - f(x)).abs()
        })
        .fold(0.0, f64::max);
    Approximant { poly, sup_error }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_to_high_accuracy() {
        let a = chebyshev_fit(|x| (-x).exp(), 1.0, 1.6, 20);
        assert!(a.sup_error < 1e-14, "{}", a.sup_error);
        assert!((a.poly.eval(1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn reproduces_cubic() {
        let a = chebyshev_fit(|x| 1.0 - 2.0 * x + x * x * x, 0.0, 2.0, 3);
        assert!(a.sup_error < 1e-13);
    }
}
