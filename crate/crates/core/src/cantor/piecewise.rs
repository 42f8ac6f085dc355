//! Piecewise polynomials on the real line with exact integration and
//! convolution against piecewise-constant densities.

use super::scalar::Scalar;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Polynomial in a local coordinate, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    pub c: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    pub fn new(mut c: Vec<T>) -> Self {
        if c.is_empty() {
            c.push(T::zero());
        }
        Poly { c }
    }

    pub fn zero() -> Self {
        Poly { c: vec![T::zero()] }
    }

    pub fn constant(v: T) -> Self {
        Poly { c: vec![v] }
    }

    pub fn linear(v: T, slope: T) -> Self {
        Poly { c: vec![v, slope] }
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn eval(&self, t: &T) -> T {
        let mut acc = T::zero();
        for ci in self.c.iter().rev() {
            acc = acc * t.clone() + ci.clone();
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.c.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, ci)| ci.clone() * T::int(i as i64))
                .collect(),
        )
    }

    /// Antiderivative vanishing at t = 0.
    pub fn integral(&self) -> Self {
        let mut c = Vec::with_capacity(self.c.len() + 1);
        c.push(T::zero());
        for (i, ci) in self.c.iter().enumerate() {
            c.push(ci.clone() / T::int(i as i64 + 1));
        }
        Poly::new(c)
    }

    /// q(t) = p(t + s), by repeated synthetic division.
    pub fn shift(&self, s: &T) -> Self {
        let mut c = self.c.clone();
        let n = c.len();
        if s.is_zero() {
            return Poly { c };
        }
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let t = c[j + 1].clone() * s.clone();
                c[j] = c[j].clone() + t;
            }
        }
        Poly { c }
    }

    pub fn add_scaled(&mut self, other: &Poly<T>, k: &T) {
        if other.c.len() > self.c.len() {
            self.c.resize(other.c.len(), T::zero());
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a = a.clone() + b.clone() * k.clone();
        }
    }

    /// sup over t in [0, len] of |p(t)| is at most this.
    pub fn bound(&self, len: &T) -> T {
        let mut acc = T::zero();
        let mut p = T::one();
        for ci in &self.c {
            acc = acc + ci.abs() * p.clone();
            p = p * len.abs();
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
    None,
}

/// Piecewise polynomial with pieces (-inf, b0), [b0, b1), ..., [b_{n-1}, inf).
/// Piece i is written in t = x - anchor(i), anchor(0) = b0 and
/// anchor(i) = b_{i-1} otherwise. Evaluation is right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly<T> {
    pub breaks: Vec<T>,
    pub pieces: Vec<Poly<T>>,
    pub parity: Parity,
}

impl<T: Scalar> PiecewisePoly<T> {
    pub fn new(breaks: Vec<T>, pieces: Vec<Poly<T>>, parity: Parity) -> Self {
        assert!(!breaks.is_empty() && pieces.len() == breaks.len() + 1);
        debug_assert!(breaks.windows(2).all(|w| w[0] < w[1]));
        PiecewisePoly { breaks, pieces, parity }
    }

    pub fn anchor(&self, i: usize) -> &T {
        if i == 0 {
            &self.breaks[0]
        } else {
            &self.breaks[i - 1]
        }
    }

    pub fn piece_index(&self, x: &T) -> usize {
        self.breaks.partition_point(|b| b <= x)
    }

    pub fn eval(&self, x: &T) -> T {
        let i = self.piece_index(x);
        self.pieces[i].eval(&(x.clone() - self.anchor(i).clone()))
    }

    /// Limit from the left.
    pub fn eval_left(&self, x: &T) -> T {
        let i = self.breaks.partition_point(|b| b < x);
        self.pieces[i].eval(&(x.clone() - self.anchor(i).clone()))
    }

    pub fn derivative(&self) -> Self {
        let parity = match self.parity {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
            Parity::None => Parity::None,
        };
        PiecewisePoly {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| p.derivative()).collect(),
            parity,
        }
    }

    /// Continuous antiderivative G with G(c) = 0.
    pub fn antiderivative(&self, c: &T) -> Self {
        let n = self.pieces.len();
        let mut pieces: Vec<Poly<T>> = self.pieces.iter().map(|p| p.integral()).collect();
        // Continuity across break j (between piece j and j+1). Piece j+1 is
        // anchored at breaks[j], so its value there is its constant term.
        let end_value = |pieces: &Vec<Poly<T>>, j: usize| -> T {
            let t = self.breaks[j].clone() - self.anchor(j).clone();
            pieces[j].eval(&t)
        };
        let p = self.piece_index(c);
        let tc = c.clone() - self.anchor(p).clone();
        let v = pieces[p].eval(&tc);
        pieces[p].c[0] = pieces[p].c[0].clone() - v;
        for j in p..n - 1 {
            let v = end_value(&pieces, j);
            // piece j+1 at its anchor evaluates to c[0] (local t = 0), except
            // piece 0 whose anchor equals breaks[0] as well
            let cur = pieces[j + 1].eval(&(self.breaks[j].clone() - self.anchor(j + 1).clone()));
            pieces[j + 1].c[0] = pieces[j + 1].c[0].clone() + v - cur;
        }
        for j in (0..p).rev() {
            // match piece j to piece j+1 at breaks[j]
            let target = pieces[j + 1].eval(&(self.breaks[j].clone() - self.anchor(j + 1).clone()));
            let cur = end_value(&pieces, j);
            pieces[j].c[0] = pieces[j].c[0].clone() + target - cur;
        }
        let parity = match self.parity {
            Parity::Odd if c.is_zero() => Parity::Even,
            Parity::Even if c.is_zero() => Parity::Odd,
            _ => Parity::None,
        };
        PiecewisePoly { breaks: self.breaks.clone(), pieces, parity }
    }

    /// Integral over [a, b].
    pub fn integrate(&self, a: &T, b: &T) -> T {
        let g = self.antiderivative(a);
        g.eval(b)
    }

    /// Size of the jump at each break, right limit minus left limit.
    pub fn jumps(&self) -> Vec<T> {
        self.breaks
            .iter()
            .map(|b| self.eval(b) - self.eval_left(b))
            .collect()
    }

    pub fn to_f64(&self) -> PiecewisePoly<f64> {
        PiecewisePoly {
            breaks: self.breaks.iter().map(|b| b.to_f64_lossy()).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| Poly { c: p.c.iter().map(|c| c.to_f64_lossy()).collect() })
                .collect(),
            parity: self.parity,
        }
    }
}

/// Piecewise-constant density: (left, right, height) triples.
pub type Density<T> = [(T, T, T)];

/// One polynomial piece of a convolution, written in t = x - lo.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub lo: T,
    pub hi: T,
    pub poly: Poly<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn bound(&self) -> T {
        self.poly.bound(&(self.hi.clone() - self.lo.clone()))
    }
}

/// (f * rho)(x) = sum_l h_l (F(x - a_l) - F(x - b_l)) at a point, where
/// `anti` is an antiderivative F of f.
pub fn conv_at<T: Scalar>(anti: &PiecewisePoly<T>, rho: &Density<T>, x: &T) -> T {
    let mut acc = T::zero();
    for (a, b, h) in rho {
        let v = anti.eval(&(x.clone() - a.clone())) - anti.eval(&(x.clone() - b.clone()));
        acc = acc + h.clone() * v;
    }
    acc
}

/// Every location in (lo, hi) where some term F(x - e) changes piece.
fn window_breaks<T: Scalar>(
    anti: &PiecewisePoly<T>,
    rho: &Density<T>,
    lo: &T,
    hi: &T,
    max_breaks: usize,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (a, b, _) in rho {
        for e in [a, b] {
            let from = lo.clone() - e.clone();
            let to = hi.clone() - e.clone();
            let i0 = anti.breaks.partition_point(|x| x <= &from);
            for br in &anti.breaks[i0..] {
                if br >= &to {
                    break;
                }
                out.push(br.clone() + e.clone());
                if out.len() > max_breaks {
                    return Err(Error::Overflow { count: out.len(), bound: max_breaks });
                }
            }
        }
    }
    out.sort_by(|x, y| x.partial_cmp(y).expect("ordered scalars"));
    let scale = hi.clone() - lo.clone();
    let tol = T::coalesce_tol(&scale);
    let mut merged: Vec<T> = Vec::with_capacity(out.len());
    for x in out {
        match merged.last() {
            Some(l) if (x.clone() - l.clone()).abs() <= tol => {}
            _ => merged.push(x),
        }
    }
    Ok(merged)
}

fn conv_piece<T: Scalar>(anti: &PiecewisePoly<T>, rho: &Density<T>, p: &T, probe: &T) -> Poly<T> {
    let mut acc = Poly::zero();
    for (a, b, h) in rho {
        for (e, sign) in [(a, T::one()), (b, -T::one())] {
            let u = probe.clone() - e.clone();
            let i = anti.piece_index(&u);
            let s = p.clone() - e.clone() - anti.anchor(i).clone();
            let shifted = anti.pieces[i].shift(&s);
            acc.add_scaled(&shifted, &(sign * h.clone()));
        }
    }
    acc
}

/// The convolution of f (given by its antiderivative) with `rho`, restricted
/// to [lo, hi], as exact polynomial segments.
pub fn conv_window<T: Scalar>(
    anti: &PiecewisePoly<T>,
    rho: &Density<T>,
    lo: &T,
    hi: &T,
    max_breaks: usize,
) -> Result<Vec<Segment<T>>> {
    let inner = window_breaks(anti, rho, lo, hi, max_breaks)?;
    let mut pts = Vec::with_capacity(inner.len() + 2);
    pts.push(lo.clone());
    pts.extend(inner);
    pts.push(hi.clone());
    let two = T::int(2);
    Ok(pts
        .windows(2)
        .filter(|w| w[0] < w[1])
        .map(|w| {
            let mid = (w[0].clone() + w[1].clone()) / two.clone();
            Segment { lo: w[0].clone(), hi: w[1].clone(), poly: conv_piece(anti, rho, &w[0], &mid) }
        })
        .collect())
}

/// The full convolution f * rho as a piecewise polynomial on the line.
pub fn exact_convolve<T: Scalar>(
    f: &PiecewisePoly<T>,
    rho: &Density<T>,
    max_breaks: usize,
) -> Result<PiecewisePoly<T>> {
    let anti = f.antiderivative(&T::zero());
    let mut lo = None::<T>;
    let mut hi = None::<T>;
    for (a, b, _) in rho {
        for e in [a, b] {
            let l = anti.breaks[0].clone() + e.clone();
            let h = anti.breaks[anti.breaks.len() - 1].clone() + e.clone();
            if lo.as_ref().map_or(true, |x| &l < x) {
                lo = Some(l);
            }
            if hi.as_ref().map_or(true, |x| &h > x) {
                hi = Some(h);
            }
        }
    }
    let (lo, hi) = match (lo, hi) {
        (Some(l), Some(h)) => (l, h),
        _ => return Err(Error::Degenerate("empty density".into())),
    };
    let one = T::one();
    let segs = conv_window(&anti, rho, &lo, &hi, max_breaks)?;
    let mut breaks = vec![lo.clone()];
    let mut pieces = vec![conv_piece(&anti, rho, &lo, &(lo.clone() - one.clone()))];
    for s in segs {
        if s.lo != lo {
            breaks.push(s.lo.clone());
        }
        pieces.push(s.poly);
    }
    breaks.push(hi.clone());
    pieces.push(conv_piece(&anti, rho, &hi, &(hi.clone() + one)));
    // a density with a single breakpoint-free window can leave lo == hi
    breaks.dedup();
    pieces.truncate(breaks.len() + 1);
    Ok(PiecewisePoly::new(breaks, pieces, Parity::None))
}
