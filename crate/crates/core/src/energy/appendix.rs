//! Fourier identity for W = -|x|^b/b in one dimension:
//! int (W * mu) mu = c int |xi|^{-b-1} |mu_hat|^2 for mean-zero mu.
//!
//! A 1D grid measure is read as a piecewise-constant density (cell mass
//! spread over the cell), so both sides are computed for the same object.

use crate::error::{param, Error, Result};
use crate::measure::GridMeasure;
use crate::quad::GaussRule;
use num::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

const PANELS: usize = 4096;
const GL_NODES: usize = 16;
const GEOMETRIC_PANELS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixCheck {
    pub b: f64,
    pub lhs: f64,
    pub rhs_integral: f64,
    pub fitted_c: f64,
    /// Gamma(b) sin(pi b/2)/pi, which is 1/2 at b = 0
    pub analytic_c: f64,
    pub xi_max: f64,
    pub nodes: usize,
    /// leading-order tail estimate included in rhs_integral
    pub tail_estimate: f64,
    /// rigorous bound on the tail beyond xi_max
    pub tail_bound: f64,
}

/// Second antiderivative of W, even in x.
fn f2(b: f64, x: f64) -> f64 {
    let ax = x.abs();
    if ax == 0.0 {
        return 0.0;
    }
    if b == 0.0 {
        -0.5 * ax * ax * ax.ln() + 0.75 * ax * ax
    } else {
        -ax.powf(b + 2.0) / (b * (b + 1.0) * (b + 2.0))
    }
}

/// int_cell int_cell' W(x - y) for cells k apart.
fn cell_pair(b: f64, k: usize, h: f64) -> f64 {
    let kf = k as f64;
    if k == 0 {
        return 2.0 * f2(b, h);
    }
    f2(b, (kf + 1.0) * h) - 2.0 * f2(b, kf * h) + f2(b, (kf - 1.0) * h)
}

pub fn appendix_identity_check(b: f64, mu: &GridMeasure) -> Result<AppendixCheck> {
    if mu.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: mu.dim() });
    }
    if !(0.0..1.0).contains(&b) {
        return param(format!("b must lie in [0, 1), got {b}"));
    }
    let m = &mu.values;
    let tv: f64 = m.iter().map(|v| v.abs()).sum();
    if tv == 0.0 {
        return Err(Error::Degenerate("measure is identically zero".into()));
    }
    let total: f64 = m.iter().sum();
    if total.abs() > 1e-12 * tv {
        return Err(Error::Degenerate(format!("measure has mass {total}, not mean-zero")));
    }
    let h = mu.h;
    let n = m.len();
    // autocorrelation A(k) = sum_i m_i m_{i+k}
    let auto: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| (0..n - k).map(|i| m[i] * m[i + k]).sum())
        .collect();
    let mut lhs = auto[0] * cell_pair(b, 0, h);
    for (k, a) in auto.iter().enumerate().skip(1) {
        lhs += 2.0 * a * cell_pair(b, k, h);
    }
    lhs /= h * h;

    // mu_hat(xi) = sinc(xi h/2) sum_j m_j exp(-i x_j xi); |.| drops the
    // origin phase so the sum is a polynomial in exp(-i h xi)
    let spec_sq = |xi: f64| -> f64 {
        let z = Complex::from_polar(1.0, -h * xi);
        let mut s = Complex::new(0.0, 0.0);
        for &v in m.iter().rev() {
            s = s * z + v;
        }
        let u = 0.5 * xi * h;
        let sinc = if u == 0.0 { 1.0 } else { u.sin() / u };
        s.norm_sqr() * sinc * sinc
    };
    let xi_max = 32.0 * PI / h;
    let lo = 1e-8;
    let knee = 1.0f64.min(xi_max);
    let mut edges: Vec<f64> = (0..=GEOMETRIC_PANELS)
        .map(|i| lo * (knee / lo).powf(i as f64 / GEOMETRIC_PANELS as f64))
        .collect();
    let uniform = PANELS - GEOMETRIC_PANELS;
    for i in 1..=uniform {
        edges.push(knee + (xi_max - knee) * i as f64 / uniform as f64);
    }
    let g = GaussRule::new(GL_NODES);
    let half: f64 = edges
        .par_windows(2)
        .map(|e| g.integrate(e[0], e[1], |xi| xi.powf(-b - 1.0) * spec_sq(xi)))
        .sum();
    // |mu_hat|^2 xi^{-b-1} = P(xi) xi^{-b-3} with P of period 2 pi/h and
    // mean 2 (A(0) - A(1))/h^2
    let a1 = if n > 1 { auto[1] } else { 0.0 };
    let mean_p = 2.0 * (auto[0] - a1) / (h * h);
    let tail_estimate = 2.0 * mean_p * xi_max.powf(-b - 2.0) / (b + 2.0);
    let tail_bound = 8.0 * tv * tv / (h * h * (b + 2.0) * xi_max.powf(b + 2.0));
    let rhs_integral = 2.0 * half + tail_estimate;
    let analytic_c = if b == 0.0 { 0.5 } else { gamma(b) * (PI * b / 2.0).sin() / PI };
    Ok(AppendixCheck {
        b,
        lhs,
        rhs_integral,
        fitted_c: lhs / rhs_integral,
        analytic_c,
        xi_max,
        nodes: PANELS * GL_NODES,
        tail_estimate,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mean_zero(seed: u64, n: usize) -> GridMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        GridMeasure::new(vec![0.0], 1.0 / n as f64, vec![n], v).unwrap()
    }

    #[test]
    fn second_antiderivative() {
        for &b in &[0.0, 0.5] {
            let x = 0.7;
            let e = 1e-3;
            let fd = (f2(b, x + e) - 2.0 * f2(b, x) + f2(b, x - e)) / (e * e);
            let w = if b == 0.0 { -x.ln() } else { -x.powf(b) / b };
            assert!((fd - w).abs() < 1e-6);
        }
    }

    #[test]
    fn fitted_constant_matches_analytic() {
        for &b in &[0.0, 0.5] {
            for seed in 0..3 {
                let r = appendix_identity_check(b, &random_mean_zero(seed, 64)).unwrap();
                assert!(r.lhs > 0.0);
                assert!((r.fitted_c / r.analytic_c - 1.0).abs() < 1e-3, "{r:?}");
            }
        }
    }

    #[test]
    fn quadratic_scaling_is_exact() {
        let mu = random_mean_zero(7, 40);
        let r1 = appendix_identity_check(0.0, &mu).unwrap();
        let r2 = appendix_identity_check(0.0, &mu.scaled(2.0)).unwrap();
        assert_eq!(r2.lhs, 4.0 * r1.lhs);
    }

    #[test]
    fn two_bumps_are_positive() {
        let n = 101;
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v[n - 1] = -1.0;
        let mu = GridMeasure::new(vec![0.0], 0.01, vec![n], v).unwrap();
        assert!(appendix_identity_check(0.0, &mu).unwrap().lhs > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let z = GridMeasure::new(vec![0.0], 0.1, vec![4], vec![0.0; 4]).unwrap();
        assert!(matches!(appendix_identity_check(0.0, &z), Err(Error::Degenerate(_))));
        let p = GridMeasure::new(vec![0.0], 0.1, vec![2], vec![1.0, 0.0]).unwrap();
        assert!(matches!(appendix_identity_check(0.0, &p), Err(Error::Degenerate(_))));
        let mu = random_mean_zero(1, 8);
        assert!(appendix_identity_check(1.0, &mu).is_err());
    }
}
