//! Quadrature rules and a bracketing root finder.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre over the panels delimited by `edges`.
pub struct GaussRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        GaussRule { x, w }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut s = 0.0;
        for (xi, wi) in self.x.iter().zip(&self.w) {
            s += wi * f(c + r * xi);
        }
        s * r
    }

    pub fn panels<F: FnMut(f64) -> f64>(&self, edges: &[f64], mut f: F) -> f64 {
        edges
            .windows(2)
            .map(|e| self.integrate(e[0], e[1], &mut f))
            .sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.w.iter().copied())
    }
}

/// Tanh-sinh quadrature on [a, b]. The integrand receives the node together
/// with its distances to both endpoints, computed without cancellation, so
/// algebraic endpoint singularities are integrated to near machine precision.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(a: f64, b: f64, level: u32, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    if half == 0.0 {
        return 0.0;
    }
    let step = 0.5f64.powi(level as i32);
    let tmax = 4.0;
    let n = (tmax / step).ceil() as i64;
    let mut sum = 0.0;
    for k in -n..=n {
        let t = k as f64 * step;
        let u = 0.5 * PI * t.sinh();
        let cu = u.cosh();
        let w = 0.5 * PI * t.cosh() / (cu * cu);
        // 1 - |x| = exp(-|u|) / cosh(u)
        let comp = (-u.abs()).exp() / cu;
        if comp == 0.0 || w < 1e-300 {
            continue;
        }
        let (x, da, db) = if u >= 0.0 {
            let db = half * comp;
            (b - db, 2.0 * half - db, db)
        } else {
            let da = half * comp;
            (a + da, da, 2.0 * half - da)
        };
        let v = f(x, da, db);
        if v.is_finite() {
            sum += w * v;
        }
    }
    sum * half * step
}

/// Bisection on a sign-changing bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut lo: f64, mut hi: f64, tol: f64, mut f: F) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Log-spaced grid of `n` points from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}
