//! Exact verification of the Cantor steady states rho_k of W_k.
//!
//! W_k' is piecewise linear, rho_k is piecewise constant, so W_k' * rho_k and
//! W_k * rho_k are piecewise polynomials whose coefficients are computed
//! exactly over the rationals.

pub mod kernel;
pub mod piecewise;
pub mod scalar;

pub use kernel::CantorKernel;
pub use piecewise::{conv_at, conv_window, exact_convolve, Parity, PiecewisePoly, Poly, Segment};
pub use scalar::{Rational, Scalar};

use crate::error::{param, Error, Result};
use serde::{Deserialize, Serialize};
use num::Signed;

pub const MAX_LEVEL: usize = 40;
pub const DEFAULT_MAX_BREAKS: usize = 1_000_000;
pub const STEADY_TOL: f64 = 1e-10;

pub fn check_params(m: f64, alpha: f64) -> Result<()> {
    if !(m.is_finite() && m > 3.0) {
        return param(format!("M must exceed 3, got {m}"));
    }
    if !(alpha > 2.0 && alpha <= m - 1.0) {
        return param(format!("alpha must lie in (2, M-1] = (2, {}], got {alpha}", m - 1.0));
    }
    Ok(())
}

/// The sufficient condition (M+2)/3 < alpha <= 2(M-10)/5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

pub fn gate(m: f64, alpha: f64) -> Gate {
    let lower = (m + 2.0) / 3.0;
    let upper = 0.4 * (m - 10.0);
    Gate { lower, upper, pass: lower < alpha && alpha <= upper }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub x0: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorVerification {
    pub m: f64,
    pub alpha: f64,
    pub k: usize,
    /// (W_k * rho_k)(0) under the convention W_k(0+) = 0.
    pub plateau: f64,
    /// (W_k * rho_k)(1); equals `plateau` by mirror symmetry.
    pub plateau_right: f64,
    pub plateau_mismatch: f64,
    /// sup over supp rho_k of |W_k' * rho_k|.
    pub steady_residual: f64,
    /// sup over supp rho_k of |(W_k' * rho_k)'|.
    pub curvature_residual: f64,
    pub tolerance: f64,
    pub steady_pass: bool,
    pub margins: Vec<Margin>,
    pub min_margin: Option<f64>,
    pub margins_pass: Option<bool>,
    pub gate: Gate,
    pub exact: bool,
    pub normalization: String,
}

/// rho_k and W_k over the rationals, with the queries the verifier needs.
pub struct CantorLevel {
    pub m: f64,
    pub alpha: f64,
    pub k: usize,
    pub kernel: CantorKernel<Rational>,
    pub rho: Vec<(Rational, Rational, Rational)>,
    pub max_breaks: usize,
}

impl CantorLevel {
    pub fn new(m: f64, alpha: f64, k: usize) -> Result<Self> {
        check_params(m, alpha)?;
        if k > MAX_LEVEL {
            return param(format!("level {k} above cap {MAX_LEVEL}"));
        }
        if k > 24 {
            return Err(Error::Overflow { count: 1 << 25, bound: 1 << 24 });
        }
        let kernel = CantorKernel::<Rational>::new(m, alpha, k)?;
        let rho = kernel::density(&kernel.m, k);
        Ok(CantorLevel { m, alpha, k, kernel, rho, max_breaks: DEFAULT_MAX_BREAKS })
    }

    /// (W_k * rho_k)(x)
    pub fn potential_at(&self, x: &Rational) -> Rational {
        conv_at(&self.kernel.w_int, &self.rho, x)
    }

    /// (W_k' * rho_k)(x)
    pub fn force_at(&self, x: &Rational) -> Rational {
        conv_at(&self.kernel.w0, &self.rho, x)
    }

    pub fn on_support(&self, x: &Rational) -> bool {
        let i = self.rho.partition_point(|(a, _, _)| a <= x);
        i > 0 && x <= &self.rho[i - 1].1
    }

    /// W_k' * rho_k on every support interval, as exact segments.
    pub fn force_on_support(&self) -> Result<Vec<Segment<Rational>>> {
        let mut out = Vec::new();
        for (a, b, _) in &self.rho {
            out.extend(conv_window(&self.kernel.w0, &self.rho, a, b, self.max_breaks)?);
        }
        Ok(out)
    }

    /// W_k * rho_k on every support interval.
    pub fn potential_on_support(&self) -> Result<Vec<Segment<Rational>>> {
        let mut out = Vec::new();
        for (a, b, _) in &self.rho {
            out.extend(conv_window(&self.kernel.w_int, &self.rho, a, b, self.max_breaks)?);
        }
        Ok(out)
    }

    /// E[rho_k] = 1/2 int (W_k * rho_k) rho_k, exactly.
    pub fn energy(&self) -> Result<Rational> {
        let h = kernel::height(&self.kernel.m, self.k);
        let mut acc = Rational::int(0);
        for s in self.potential_on_support()? {
            let len = s.hi.clone() - s.lo.clone();
            acc = acc + s.poly.integral().eval(&len);
        }
        Ok(acc * h / Rational::int(2))
    }

    fn verification(&self) -> Result<CantorVerification> {
        let segs = self.force_on_support()?;
        let mut steady = Rational::int(0);
        let mut curv = Rational::int(0);
        for s in &segs {
            let len = s.hi.clone() - s.lo.clone();
            let b = s.bound();
            if b > steady {
                steady = b;
            }
            let c = s.poly.derivative().bound(&len);
            if c > curv {
                curv = c;
            }
        }
        let zero = Rational::int(0);
        let one = Rational::int(1);
        let p0 = self.potential_at(&zero);
        let p1 = self.potential_at(&one);
        let steady_residual = steady.to_f64_lossy();
        Ok(CantorVerification {
            m: self.m,
            alpha: self.alpha,
            k: self.k,
            plateau: p0.to_f64_lossy(),
            plateau_right: p1.to_f64_lossy(),
            plateau_mismatch: (p0 - p1).abs().to_f64_lossy(),
            steady_residual,
            curvature_residual: curv.to_f64_lossy(),
            tolerance: STEADY_TOL,
            steady_pass: steady_residual <= STEADY_TOL,
            margins: Vec::new(),
            min_margin: None,
            margins_pass: None,
            gate: gate(self.m, self.alpha),
            exact: true,
            normalization: "W_k(0+) = 0; plateau values depend on this convention".into(),
        })
    }

    pub fn margins(&self, probes: &[f64]) -> Result<Vec<Margin>> {
        let c = self.potential_at(&Rational::int(0));
        probes
            .iter()
            .map(|&x0| {
                let x = Rational::from_f64_exact(x0);
                if self.on_support(&x) {
                    return Err(Error::ProbeOnSupport(x0));
                }
                let v = self.potential_at(&x) - c.clone();
                Ok(Margin { x0, margin: v.to_f64_lossy() })
            })
            .collect()
    }
}

/// Steadiness of rho_k for W_k, from exact convolution.
pub fn verify_steady(m: f64, alpha: f64, k: usize) -> Result<CantorVerification> {
    CantorLevel::new(m, alpha, k)?.verification()
}

/// Steadiness plus the minimality margins (W_k * rho_k)(x0) - c_k.
pub fn verify_margin(m: f64, alpha: f64, k: usize, probes: &[f64]) -> Result<CantorVerification> {
    let lvl = CantorLevel::new(m, alpha, k)?;
    let mut v = lvl.verification()?;
    let margins = lvl.margins(probes)?;
    let min = margins.iter().map(|g| g.margin).fold(f64::INFINITY, f64::min);
    v.min_margin = if margins.is_empty() { None } else { Some(min) };
    v.margins_pass = Some(min > 0.0);
    v.margins = margins;
    Ok(v)
}

/// Gaps of supp rho_level in [0,1] sampled at interior fractions, plus
/// points outside [0,1] including -0.1 and 1.1 (and 0.5 when level >= 1).
pub fn default_probes(m: f64, level: usize) -> Vec<f64> {
    let iv = kernel::intervals(&m, level);
    let mut out = vec![-0.1, 1.1];
    if level >= 1 {
        out.push(0.5);
    }
    let per_gap = if level == 0 { 0 } else { (48 / ((1usize << level) - 1)).max(4) };
    for w in iv.windows(2) {
        let (g0, g1) = (w[0].1, w[1].0);
        for i in 0..per_gap {
            let f = 0.05 + 0.9 * (i as f64 + 0.5) / per_gap as f64;
            let x = g0 + f * (g1 - g0);
            if (x - 0.5).abs() > 1e-12 {
                out.push(x);
            }
        }
    }
    let outside = if level == 0 { 25 } else { 8 };
    for i in 1..=outside {
        let d = 0.6 * i as f64 / outside as f64;
        for x in [-d, 1.0 + d] {
            if (x + 0.1).abs() > 1e-9 && (x - 1.1).abs() > 1e-9 {
                out.push(x);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    pub base_level: usize,
    pub levels: Vec<usize>,
    /// margins[i][p]: level levels[i], probe p
    pub margins: Vec<Vec<f64>>,
    pub probes: Vec<f64>,
    /// min over probes and levels of margin_k(x0) / margin_base(x0)
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Margins at fixed probes off supp rho_base across levels base..=k_max must
/// stay above half their value at the base level.
pub fn margin_uniformity(
    m: f64,
    alpha: f64,
    base: usize,
    k_max: usize,
    probes: &[f64],
) -> Result<Uniformity> {
    let levels: Vec<usize> = (base..=k_max).collect();
    let mut margins = Vec::new();
    for &k in &levels {
        let lvl = CantorLevel::new(m, alpha, k)?;
        margins.push(lvl.margins(probes)?.into_iter().map(|g| g.margin).collect::<Vec<_>>());
    }
    let mut worst = f64::INFINITY;
    for row in &margins {
        for (p, &v) in row.iter().enumerate() {
            worst = worst.min(v / margins[0][p]);
        }
    }
    let pass = margins[0].iter().all(|&v| v > 0.0) && worst >= 0.5;
    Ok(Uniformity { base_level: base, levels, margins, probes: probes.to_vec(), worst_ratio: worst, pass })
}

/// max over samples x in [0, 1/M] of
/// |V_k(x) - V_k(0) - (V_{k-1}(Mx) - V_{k-1}(0)) / (2M)|.
pub fn self_similarity_check(m: f64, alpha: f64, k: usize, samples: usize) -> Result<f64> {
    if k == 0 {
        return param("self-similarity needs k >= 1");
    }
    let fine = CantorLevel::new(m, alpha, k)?;
    let coarse = CantorLevel::new(m, alpha, k - 1)?;
    let mm = Rational::from_f64_exact(m);
    let zero = Rational::int(0);
    let f0 = fine.potential_at(&zero);
    let c0 = coarse.potential_at(&zero);
    let two_m = Rational::int(2) * mm.clone();
    let n = samples.max(2);
    let mut worst = Rational::int(0);
    for i in 0..n {
        let x = Rational::int(i as i64) / (Rational::int(n as i64 - 1) * mm.clone());
        let lhs = fine.potential_at(&x) - f0.clone();
        let rhs = (coarse.potential_at(&(mm.clone() * x.clone())) - c0.clone()) / two_m.clone();
        let r = (lhs - rhs).abs();
        if r > worst {
            worst = r;
        }
    }
    Ok(worst.to_f64_lossy())
}

/// (x, V(x)) samples of W_k * rho_k on [lo, hi] in double precision.
pub fn profile(m: f64, alpha: f64, k: usize, lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let kern = CantorKernel::<f64>::new(m, alpha, k)?;
    let rho = kernel::density(&m, k);
    Ok(crate::quad::linspace(lo, hi, n)
        .into_iter()
        .map(|x| (x, conv_at(&kern.w_int, &rho, &x)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::Zero;

    fn q(x: f64) -> Rational {
        Rational::from_f64_exact(x)
    }

    #[test]
    fn k0_uniform_density_is_steady() {
        let lvl = CantorLevel::new(12.0, 5.0, 0).unwrap();
        for s in lvl.force_on_support().unwrap() {
            assert!(s.poly.c.iter().all(|c| c.is_zero()));
        }
    }

    #[test]
    fn level1_force_vanishes_at_support_points() {
        let lvl = CantorLevel::new(12.0, 5.0, 1).unwrap();
        assert!(lvl.force_at(&q(0.0)).is_zero());
        let x = Rational::int(1) / Rational::int(12);
        assert!(lvl.force_at(&x).is_zero());
    }

    #[test]
    fn steady_examples() {
        let v = verify_steady(12.0, 5.0, 4).unwrap();
        assert!(v.steady_pass && v.steady_residual <= 1e-10);
        assert!(!v.gate.pass);
        let v = verify_steady(100.0, 35.0, 3).unwrap();
        assert!(v.steady_pass);
        assert!(v.gate.pass);
        assert!(v.plateau_mismatch <= 1e-10);
    }

    #[test]
    fn curvature_identity_on_support() {
        let v = verify_steady(12.0, 5.0, 3).unwrap();
        assert!(v.curvature_residual <= 1e-10);
    }

    #[test]
    fn parameter_errors() {
        assert!(verify_steady(3.0, 2.5, 1).is_err());
        assert!(verify_steady(12.0, 2.0, 1).is_err());
        assert!(verify_steady(3.5, 5.0, 2).is_err());
        assert!(verify_steady(12.0, 11.0, 2).is_ok());
    }

    #[test]
    fn margins_and_probe_errors() {
        let v = verify_margin(100.0, 35.0, 2, &[-0.1, 0.5, 1.1]).unwrap();
        assert_eq!(v.margins.len(), 3);
        assert!(v.margins.iter().all(|g| g.margin > 0.0));
        assert!(matches!(verify_margin(12.0, 5.0, 2, &[0.0]), Err(Error::ProbeOnSupport(_))));
        assert!(matches!(
            verify_margin(12.0, 5.0, 1, &[1.0 / 24.0]),
            Err(Error::ProbeOnSupport(_))
        ));
    }

    #[test]
    fn default_probes_are_off_support() {
        for k in 0..=3 {
            let lvl = CantorLevel::new(12.0, 5.0, k).unwrap();
            let p = default_probes(12.0, k.min(2));
            assert!(p.len() >= 50, "k={k}: {}", p.len());
            for x in p {
                assert!(!lvl.on_support(&q(x)), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn mirror_symmetry_of_potential() {
        let lvl = CantorLevel::new(12.0, 5.0, 3).unwrap();
        let one = Rational::int(1);
        for i in -5..30 {
            let x = Rational::int(i) / Rational::int(23);
            assert_eq!(lvl.potential_at(&x), lvl.potential_at(&(one.clone() - x.clone())));
        }
    }

    #[test]
    fn self_similarity_small_levels() {
        assert!(self_similarity_check(12.0, 5.0, 1, 50).unwrap() <= 1e-10);
        assert!(self_similarity_check(12.0, 5.0, 2, 50).unwrap() <= 1e-10);
    }

    #[test]
    fn energy_is_half_plateau() {
        // V is constant c_k on the support, so E = c_k / 2
        let lvl = CantorLevel::new(12.0, 5.0, 2).unwrap();
        let e = lvl.energy().unwrap();
        let c = lvl.potential_at(&Rational::int(0));
        assert_eq!(e * Rational::int(2), c);
    }

    #[test]
    fn f64_profile_tracks_exact() {
        let pts = profile(12.0, 5.0, 3, -0.1, 1.1, 37).unwrap();
        let lvl = CantorLevel::new(12.0, 5.0, 3).unwrap();
        for (x, v) in pts {
            let e = lvl.potential_at(&q(x)).to_f64_lossy();
            assert!((e - v).abs() < 1e-11, "x={x}");
        }
    }
}
