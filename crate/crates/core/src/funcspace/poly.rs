use serde::{Deserialize, Serialize};

/// Polynomial in the shifted variable `x - center`, ascending coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub center: f64,
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(center: f64, coeffs: Vec<f64>) -> Self {
        let mut p = Poly { center, coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly { center: 0.0, coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Poly { center: 0.0, coeffs: vec![c] }
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == 0.0 {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(0.0);
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = x - self.center;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly { center: self.center, coeffs: vec![0.0] };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Poly::new(self.center, coeffs)
    }

    /// Antiderivative vanishing at the center.
    pub fn antiderivative(&self) -> Poly {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(self.coeffs.iter().enumerate().map(|(i, &c)| c / (i + 1) as f64));
        Poly::new(self.center, coeffs)
    }

    /// Same polynomial expanded about a new center (Taylor shift).
    pub fn recenter(&self, center: f64) -> Poly {
        let d = center - self.center;
        if d == 0.0 {
            return self.clone();
        }
        let mut b = self.coeffs.clone();
        let n = b.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                b[j] += d * b[j + 1];
            }
        }
        Poly::new(center, b)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.center, self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Sum, expanded about `center`.
    pub fn add_at(&self, other: &Poly, center: f64) -> Poly {
        let a = self.recenter(center);
        let b = other.recenter(center);
        let n = a.coeffs.len().max(b.coeffs.len());
        let coeffs = (0..n)
            .map(|i| a.coeffs.get(i).copied().unwrap_or(0.0) + b.coeffs.get(i).copied().unwrap_or(0.0))
            .collect();
        Poly::new(center, coeffs)
    }

    /// Product, expanded about `center`.
    pub fn mul_at(&self, other: &Poly, center: f64) -> Poly {
        let a = self.recenter(center);
        let b = other.recenter(center);
        let mut coeffs = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                coeffs[i + j] += x * y;
            }
        }
        Poly::new(center, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recenter_preserves_values() {
        let p = Poly::new(0.0, vec![1.0, -2.0, 0.5, 3.0]);
        let q = p.recenter(1.3);
        for &x in &[0.0, 0.4, 1.3, 2.9] {
            assert!((p.eval(x) - q.eval(x)).abs() < 1e-12);
        }
        assert_eq!(q.center, 1.3);
    }

    #[test]
    fn product_and_derivative() {
        let a = Poly::new(0.0, vec![0.0, 1.0]);
        let sq = a.mul_at(&a, 0.5);
        assert!((sq.eval(2.0) - 4.0).abs() < 1e-14);
        let d = sq.derivative();
        assert!((d.eval(3.0) - 6.0).abs() < 1e-13);
        let anti = d.antiderivative();
        assert!((anti.eval(2.0) - anti.eval(1.0) - 3.0).abs() < 1e-13);
    }
}
