use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CouplingPair;
use crate::funcspace::{gauss_legendre, PanelGrid, SineMode, PI};

/// Which of the two Volterra kernels defines the mode function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `I_k phi + (p phi)' - q phi`, giving the adjoint generalized eigenfunction.
    Adjoint,
    /// `I_k phi - p phi' - q phi`, giving the direct generalized eigenfunction.
    Direct,
}

const ORDER: usize = 16;

/// Solution of `-u'' - k^2 u = F` on (0, pi) with `u(0) = 0`, normalized
/// to be orthogonal to `phi_k`:
///
/// `u(x) = alpha phi_k(x) - (1/k) int_0^x sin(k (x - s)) F(s) ds`.
///
/// The cosine and sine moments of F are accumulated once over a panel
/// grid, so each evaluation costs a single partial panel.
#[derive(Clone, Debug)]
pub struct ModeFunction {
    k: usize,
    kernel: Kernel,
    cp: Arc<CouplingPair>,
    ik: f64,
    alpha: f64,
    cuts: Vec<f64>,
    c_cum: Vec<f64>,
    s_cum: Vec<f64>,
}

impl ModeFunction {
    pub fn new(cp: Arc<CouplingPair>, k: usize, kernel: Kernel, ik: f64) -> Self {
        let freq = 2.0 * k as f64 + cp.q_frequency();
        let width = (PI / 64.0).min(2.0 * PI / freq);
        let mut cuts = vec![0.0];
        let breaks = cp.breaks();
        let inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && b < PI).collect();
        let mut anchors = vec![0.0];
        anchors.extend(inner);
        anchors.push(PI);
        for w in anchors.windows(2) {
            let n = ((w[1] - w[0]) / width).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / n as f64;
            for i in 1..n {
                cuts.push(w[0] + h * i as f64);
            }
            cuts.push(w[1]);
        }
        let mut f = ModeFunction { k, kernel, cp, ik, alpha: 0.0, cuts, c_cum: Vec::new(), s_cum: Vec::new() };
        let (mut c, mut s) = (0.0, 0.0);
        f.c_cum.push(0.0);
        f.s_cum.push(0.0);
        for j in 0..f.cuts.len() - 1 {
            let (dc, ds) = f.moments(f.cuts[j], f.cuts[j + 1]);
            c += dc;
            s += ds;
            f.c_cum.push(c);
            f.s_cum.push(s);
        }
        f.alpha = f.projection_of_particular() / k as f64;
        f
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn coupling(&self) -> &CouplingPair {
        &self.cp
    }

    /// Right-hand side F of the defining equation.
    pub fn kernel_value(&self, x: f64) -> f64 {
        let phi = SineMode::new_unchecked(self.k);
        let (v, d) = (phi.value(x), phi.deriv(x));
        let cp = &self.cp;
        match self.kernel {
            Kernel::Adjoint => self.ik * v + cp.dp().eval(x) * v + cp.p().eval(x) * d - cp.q(x) * v,
            Kernel::Direct => self.ik * v - cp.p().eval(x) * d - cp.q(x) * v,
        }
    }

    fn moments(&self, a: f64, b: f64) -> (f64, f64) {
        if b <= a {
            return (0.0, 0.0);
        }
        let kf = self.k as f64;
        let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
        let (mut c, mut s) = (0.0, 0.0);
        for &(t, w) in gauss_legendre(ORDER) {
            let x = m + h * t;
            let f = self.kernel_value(x);
            let (sn, cs) = (kf * x).sin_cos();
            c += w * cs * f;
            s += w * sn * f;
        }
        (c * h, s * h)
    }

    /// `(C(x), S(x))`: running cosine and sine moments of F.
    fn cumulative(&self, x: f64) -> (f64, f64) {
        let x = x.clamp(0.0, PI);
        let j = self.cuts.partition_point(|&c| c <= x).saturating_sub(1).min(self.cuts.len() - 2);
        let (dc, ds) = self.moments(self.cuts[j], x);
        (self.c_cum[j] + dc, self.s_cum[j] + ds)
    }

    fn particular(&self, x: f64) -> f64 {
        let (c, s) = self.cumulative(x);
        let (sn, cs) = (self.k as f64 * x).sin_cos();
        sn * c - cs * s
    }

    fn projection_of_particular(&self) -> f64 {
        let phi = SineMode::new_unchecked(self.k);
        let mut acc = 0.0;
        for w in self.cuts.windows(2) {
            let (h, m) = (0.5 * (w[1] - w[0]), 0.5 * (w[0] + w[1]));
            for &(t, wt) in gauss_legendre(ORDER) {
                let x = m + h * t;
                acc += wt * h * self.particular(x) * phi.value(x);
            }
        }
        acc
    }

    pub fn value(&self, x: f64) -> f64 {
        let phi = SineMode::new_unchecked(self.k);
        self.alpha * phi.value(x) - self.particular(x) / self.k as f64
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let phi = SineMode::new_unchecked(self.k);
        let (c, s) = self.cumulative(x);
        let (sn, cs) = (self.k as f64 * x).sin_cos();
        self.alpha * phi.deriv(x) - (cs * c + sn * s)
    }

    pub fn samples(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.value(x)).collect()
    }

    /// Spectral residual of `-u'' - k^2 u = F` with Dirichlet data, in L2:
    /// `r_m = (m^2 - k^2) <u, phi_m> - <F, phi_m>` over enough modes to
    /// resolve F. A nonzero boundary value at pi shows up as a
    /// non-decaying tail of `r_m`.
    pub fn eigen_residual(&self) -> f64 {
        let modes = 2 * self.k + self.cp.q_frequency() as usize + 64;
        let width = (PI / 64.0).min(2.0 * PI / (modes + self.k) as f64);
        let grid = PanelGrid::new(0.0, PI, &self.cp.breaks(), width, ORDER);
        let u: Vec<f64> = grid.nodes.iter().map(|&x| self.value(x)).collect();
        let f: Vec<f64> = grid.nodes.iter().map(|&x| self.kernel_value(x)).collect();
        let k2 = (self.k * self.k) as f64;
        let mut sum = 0.0;
        for m in 1..=modes {
            let phi = SineMode::new_unchecked(m);
            let (mut pu, mut pf) = (0.0, 0.0);
            for ((&x, &w), (&uv, &fv)) in grid.nodes.iter().zip(&grid.weights).zip(u.iter().zip(&f)) {
                let b = w * phi.value(x);
                pu += b * uv;
                pf += b * fv;
            }
            let r = ((m * m) as f64 - k2) * pu - pf;
            sum += r * r;
        }
        sum.sqrt()
    }
}
