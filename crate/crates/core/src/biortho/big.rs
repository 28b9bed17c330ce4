//! Thin multiprecision layer over `astro-float`.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode, Sign, Word};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Option<Consts>> = const { RefCell::new(None) };
}

/// Working precision in bits; every operation rounds to it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Big {
    pub bits: usize,
}

impl Big {
    pub fn num(self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.bits)
    }
    pub fn zero(self) -> BigFloat {
        self.num(0.0)
    }
    pub fn add(self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.bits, RM)
    }
    pub fn sub(self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.bits, RM)
    }
    pub fn mul(self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.bits, RM)
    }
    pub fn div(self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.bits, RM)
    }

    pub fn exp(self, x: &BigFloat) -> Result<BigFloat> {
        CONSTS.with(|c| {
            let mut slot = c.borrow_mut();
            if slot.is_none() {
                *slot = Some(Consts::new().map_err(|e| Error::InvalidInput(format!("multiprecision constants: {e:?}")))?);
            }
            Ok(x.exp(self.bits, RM, slot.as_mut().expect("initialized above")))
        })
    }

    /// `int_0^T t^n e^(-s t) dt` for `n <= 2`.
    pub fn moment(self, n: usize, s: f64, horizon: f64) -> Result<BigFloat> {
        let s_big = self.num(s);
        let x = self.mul(&s_big, &self.num(horizon));
        let e = self.exp(&x.neg())?;
        let one = self.num(1.0);
        let (lead, poly) = match n {
            0 => (one.clone(), one),
            1 => (one.clone(), self.add(&one, &x)),
            _ => {
                let two = self.num(2.0);
                let x2 = self.mul(&x, &x);
                let p = self.add(&self.add(&two, &self.mul(&two, &x)), &x2);
                (two, p)
            }
        };
        let num = self.sub(&lead, &self.mul(&poly, &e));
        Ok(self.div(&num, &s_big.powi(n + 1, self.bits, RM)))
    }

    /// `(int_0^T e^(-d s) ds, int_0^T s e^(-d s) ds)` for real `d`.
    pub fn shifted_moments(self, d: f64, horizon: f64) -> Result<(BigFloat, BigFloat)> {
        if d == 0.0 {
            let t = self.num(horizon);
            return Ok((t.clone(), self.div(&self.mul(&t, &t), &self.num(2.0))));
        }
        Ok((self.moment(0, d, horizon)?, self.moment(1, d, horizon)?))
    }

    /// Inverse of a symmetric positive definite matrix through Cholesky.
    pub fn spd_inverse(self, g: &[Vec<BigFloat>]) -> Option<Vec<Vec<BigFloat>>> {
        let n = g.len();
        let mut l = vec![vec![self.zero(); n]; n];
        for j in 0..n {
            let mut d = g[j][j].clone();
            for k in 0..j {
                d = self.sub(&d, &self.mul(&l[j][k], &l[j][k]));
            }
            if d.is_negative() || d.is_zero() {
                return None;
            }
            let djj = d.sqrt(self.bits, RM);
            for i in j + 1..n {
                let mut s = g[i][j].clone();
                for k in 0..j {
                    s = self.sub(&s, &self.mul(&l[i][k], &l[j][k]));
                }
                l[i][j] = self.div(&s, &djj);
            }
            l[j][j] = djj;
        }
        let mut inv = vec![vec![self.zero(); n]; n];
        for col in 0..n {
            let mut y = vec![self.zero(); n];
            for i in 0..n {
                let mut s = if i == col { self.num(1.0) } else { self.zero() };
                for k in 0..i {
                    s = self.sub(&s, &self.mul(&l[i][k], &y[k]));
                }
                y[i] = self.div(&s, &l[i][i]);
            }
            for i in (0..n).rev() {
                let mut s = y[i].clone();
                for k in i + 1..n {
                    s = self.sub(&s, &self.mul(&l[k][i], &inv[k][col]));
                }
                inv[i][col] = self.div(&s, &l[i][i]);
            }
        }
        Some(inv)
    }
}

/// Nearest double, up to a few ulps.
pub(crate) fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let Some((words, _, sign, exp, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    let bits = Word::BITS as i32;
    let mut m = 0.0f64;
    for (i, w) in words.iter().rev().take(2).enumerate() {
        m += (*w as f64) * 2f64.powi(-bits * (i as i32 + 1));
    }
    // Mantissa in [1/2, 1); split the scaling so neither factor overflows.
    let e = exp;
    let v = m * 2f64.powi(e / 2) * 2f64.powi(e - e / 2);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_to_double() {
        let b = Big { bits: 256 };
        for x in [1.0, -3.25, 1e-300, 7.1e250, std::f64::consts::PI] {
            assert_eq!(to_f64(&b.num(x)), x);
        }
    }

    #[test]
    fn exp_matches_double() {
        let b = Big { bits: 256 };
        let e = b.exp(&b.num(-2.5)).unwrap();
        assert!((to_f64(&e) - (-2.5f64).exp()).abs() < 1e-16);
    }
}
