//! The level-k Cantor kernel W_k and the intervals of rho_k.

use super::piecewise::{Parity, PiecewisePoly, Poly};
use super::scalar::Scalar;
use crate::error::Result;

/// W_k' together with W_k (W_k(0) = 0) and its antiderivative H (H(0) = 0).
#[derive(Debug, Clone)]
pub struct CantorKernel<T> {
    pub m: T,
    pub alpha: T,
    pub k: usize,
    pub w1: PiecewisePoly<T>,
    pub w0: PiecewisePoly<T>,
    pub w_int: PiecewisePoly<T>,
    w2: PiecewisePoly<T>,
}

/// M^{-j}
pub(crate) fn inv_pow<T: Scalar>(m: &T, j: usize) -> T {
    let mut p = T::one();
    for _ in 0..j {
        p = p * m.clone();
    }
    T::one() / p
}

/// Knots (x, omega_k(x)) of the piecewise-linear correction on x >= 0.
/// omega_k is 0 at the origin, constant past the last knot, linear between.
pub fn omega_knots<T: Scalar>(m: &T, alpha: &T, k: usize) -> Vec<(T, T)> {
    let zero = T::zero();
    let half = T::half();
    let neg = -T::int(3) / T::int(2);
    let two = T::int(2);
    let mut knots = vec![(zero.clone(), zero.clone())];
    for j in (1..=k).rev() {
        let s = inv_pow(m, j);
        let start = if j == k { zero.clone() } else { half.clone() };
        let pts = [
            ((m.clone() - alpha.clone()) * s.clone(), start),
            ((m.clone() - two.clone()) * s.clone(), neg.clone()),
            (m.clone() * s.clone(), half.clone()),
        ];
        for (x, v) in pts {
            let last = knots.last().expect("nonempty");
            if x > last.0 {
                knots.push((x, v));
            }
        }
    }
    knots
}

impl<T: Scalar> CantorKernel<T> {
    pub fn new(m: f64, alpha: f64, k: usize) -> Result<Self> {
        super::check_params(m, alpha)?;
        let m = T::from_f64_exact(m);
        let alpha = T::from_f64_exact(alpha);
        let knots = omega_knots(&m, &alpha, k);
        let two = T::int(2);
        // base(x) = M/(2M-4) (2x - 1) on x > 0
        let coef = m.clone() / (two.clone() * m.clone() - T::int(4));
        let base_slope = two.clone() * coef.clone();
        let base = |x: &T| coef.clone() * (two.clone() * x.clone() - T::one());

        // positive pieces: value at left knot and slope
        let mut pos: Vec<(T, T)> = Vec::new();
        for w in knots.windows(2) {
            let (x0, v0) = &w[0];
            let (x1, v1) = &w[1];
            let s = (v1.clone() - v0.clone()) / (x1.clone() - x0.clone());
            pos.push((base(x0) + v0.clone(), base_slope.clone() + s));
        }
        let (xl, vl) = knots.last().expect("nonempty").clone();
        pos.push((base(&xl) + vl, base_slope.clone()));

        let xs: Vec<T> = knots.iter().map(|(x, _)| x.clone()).collect();
        let n = xs.len();
        // right end value of positive piece i (at xs[i+1])
        let right_end = |i: usize| -> T {
            let (v, s) = &pos[i];
            v.clone() + s.clone() * (xs[i + 1].clone() - xs[i].clone())
        };

        let mut breaks = Vec::with_capacity(2 * n - 1);
        for x in xs.iter().skip(1).rev() {
            breaks.push(-x.clone());
        }
        breaks.extend(xs.iter().cloned());

        let mut pieces = Vec::with_capacity(2 * n);
        // (-inf, -x_last): mirror of the last positive piece
        let (v_last, s_last) = &pos[n - 1];
        pieces.push(Poly::linear(-v_last.clone(), s_last.clone()));
        // [-x_{i+1}, -x_i) for i = n-2 .. 0, anchored at -x_{i+1}
        for i in (0..n - 1).rev() {
            pieces.push(Poly::linear(-right_end(i), pos[i].1.clone()));
        }
        for (v, s) in &pos {
            pieces.push(Poly::linear(v.clone(), s.clone()));
        }
        let w1 = PiecewisePoly::new(breaks, pieces, Parity::Odd);
        let zero = T::zero();
        let w0 = w1.antiderivative(&zero);
        let w_int = w0.antiderivative(&zero);
        let w2 = w1.derivative();
        Ok(CantorKernel { m, alpha, k, w1, w0, w_int, w2 })
    }
}

impl CantorKernel<f64> {
    pub fn w0(&self, r: f64) -> f64 {
        self.w0.eval(&r)
    }

    pub fn w1(&self, r: f64) -> f64 {
        self.w1.eval(&r)
    }

    pub fn w2(&self, r: f64) -> f64 {
        self.w2.eval(&r)
    }

    /// Positive breakpoints of W_k'.
    pub fn positive_breaks(&self) -> Vec<f64> {
        self.w1.breaks.iter().copied().filter(|&b| b > 0.0).collect()
    }

    pub fn magnitude(&self, r: f64, order: u8) -> f64 {
        let s = self.m / (2.0 * self.m - 4.0);
        match order {
            0 => self.w0(r).abs() + s * (r + r * r),
            1 => self.w1(r).abs() + s * (1.0 + 2.0 * r),
            _ => self.w2(r).abs() + 2.0 * s,
        }
    }
}

/// The 2^k intervals of rho_k in index order (left child 2l, right 2l+1).
pub fn intervals<T: Scalar>(m: &T, k: usize) -> Vec<(T, T)> {
    let mut cur = vec![(T::zero(), T::one())];
    let mut len = T::one();
    for _ in 0..k {
        len = len / m.clone();
        let mut next = Vec::with_capacity(cur.len() * 2);
        for (a, b) in cur {
            next.push((a.clone(), a + len.clone()));
            next.push((b.clone() - len.clone(), b));
        }
        cur = next;
    }
    cur
}

/// (M/2)^k
pub fn height<T: Scalar>(m: &T, k: usize) -> T {
    let half_m = m.clone() / T::int(2);
    let mut h = T::one();
    for _ in 0..k {
        h = h * half_m.clone();
    }
    h
}

/// rho_k as (left, right, height) triples.
pub fn density<T: Scalar>(m: &T, k: usize) -> Vec<(T, T, T)> {
    let h = height(m, k);
    intervals(m, k)
        .into_iter()
        .map(|(a, b)| (a, b, h.clone()))
        .collect()
}
