//! Radial interaction kernels W(r) and their derivatives.

use crate::cantor::CantorKernel;
use crate::error::{param, Error, Result};
use crate::quad::GaussRule;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::{E, PI};

/// Closed description of one kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// W = r^a/a - r^b/b, with r^0/0 read as ln r.
    PowerLaw { a: f64, b: f64, d: usize },
    /// Riesz repulsion c_{d,alpha} r^{alpha-d} plus c2 r^2/2.
    RieszQuad { d: usize, alpha: f64, c2: f64 },
    /// RieszQuad minus a geometric ladder of K Gaussians.
    HierGauss {
        d: usize,
        alpha: f64,
        lambda: f64,
        c_w: f64,
        k_trunc: usize,
        c2: f64,
    },
    /// One-dimensional level-k Cantor kernel W_k.
    CantorPotential {
        m_ratio: f64,
        alpha: f64,
        cantor_level: usize,
    },
}

impl PotentialSpec {
    pub fn dim(&self) -> usize {
        match *self {
            PotentialSpec::PowerLaw { d, .. }
            | PotentialSpec::RieszQuad { d, .. }
            | PotentialSpec::HierGauss { d, .. } => d,
            PotentialSpec::CantorPotential { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::PowerLaw { a, b, d } => {
                check_dim(d)?;
                if !(a.is_finite() && b.is_finite()) || !(a > b && b > -(d as f64)) {
                    return param(format!("power law needs a > b > -d, got a={a}, b={b}, d={d}"));
                }
            }
            PotentialSpec::RieszQuad { d, alpha, c2 } => {
                check_dim(d)?;
                check_riesz_alpha(d, alpha)?;
                if !(c2 >= 0.0) {
                    return param(format!("c2 must be >= 0, got {c2}"));
                }
            }
            PotentialSpec::HierGauss { d, alpha, lambda, c_w, c2, .. } => {
                check_dim(d)?;
                check_riesz_alpha(d, alpha)?;
                if d == 1 && alpha > 1.0 && alpha < 2.0 {
                    return param(format!(
                        "alpha={alpha} in (1,2) is not admissible for d=1"
                    ));
                }
                if !(lambda > 0.0 && lambda < 1.0) {
                    return param(format!("lambda must lie in (0,1), got {lambda}"));
                }
                if !(c_w > 0.0 && c_w.is_finite()) {
                    return param(format!("c_w must be > 0, got {c_w}"));
                }
                if !(c2 >= 0.0 && c2.is_finite()) {
                    return param(format!("c2 must be >= 0, got {c2}"));
                }
            }
            PotentialSpec::CantorPotential { m_ratio, alpha, cantor_level } => {
                crate::cantor::check_params(m_ratio, alpha)?;
                if cantor_level > crate::cantor::MAX_LEVEL {
                    return param(format!(
                        "cantor level {cantor_level} above cap {}",
                        crate::cantor::MAX_LEVEL
                    ));
                }
            }
        }
        Ok(())
    }

    /// Validated, evaluation-ready kernel.
    pub fn kernel(&self) -> Result<Kernel> {
        self.validate()?;
        Ok(match *self {
            PotentialSpec::PowerLaw { a, b, .. } => Kernel::PowerLaw { a, b },
            PotentialSpec::RieszQuad { d, alpha, c2 } => Kernel::Hier(HierKernel {
                d,
                alpha,
                riesz: RieszConstant::new(d, alpha)?,
                c2,
                c_w: 0.0,
                ladder: Vec::new(),
            }),
            PotentialSpec::HierGauss { d, alpha, lambda, c_w, k_trunc, c2 } => {
                let ladder = (1..=k_trunc)
                    .map(|k| {
                        let s = lambda.powi(k as i32);
                        (lambda.powf((alpha - d as f64) * k as f64), s)
                    })
                    .collect();
                Kernel::Hier(HierKernel {
                    d,
                    alpha,
                    riesz: RieszConstant::new(d, alpha)?,
                    c2,
                    c_w,
                    ladder,
                })
            }
            PotentialSpec::CantorPotential { m_ratio, alpha, cantor_level } => {
                Kernel::Cantor(Box::new(CantorKernel::new(m_ratio, alpha, cantor_level)?))
            }
        })
    }

    /// Bound on the neglected tail of the Gaussian ladder.
    pub fn truncation_bound(&self) -> Option<f64> {
        match *self {
            PotentialSpec::HierGauss { d, alpha, lambda, k_trunc, .. } => {
                let e = alpha - d as f64;
                if e <= 0.0 {
                    return Some(f64::INFINITY);
                }
                let q = lambda.powf(e);
                Some(q.powi(k_trunc as i32 + 1) / (1.0 - q))
            }
            _ => None,
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > 3 {
        return param(format!("dimension must be 1, 2 or 3, got {d}"));
    }
    Ok(())
}

fn check_riesz_alpha(d: usize, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < d as f64 + 2.0) {
        return param(format!("alpha must lie in (0, d+2), got {alpha} for d={d}"));
    }
    Ok(())
}

/// c_{d,alpha}, the constant whose Riesz kernel has Fourier transform |xi|^{-alpha}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszConstant {
    pub d: usize,
    pub alpha: f64,
    /// Multiplies r^{alpha-d}, or ln r on the log branch.
    pub value: f64,
    pub log_branch: bool,
}

impl RieszConstant {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        check_dim(d)?;
        check_riesz_alpha(d, alpha)?;
        let df = d as f64;
        let pre = PI.powf(df / 2.0) * 2f64.powf(alpha) * gamma(alpha / 2.0);
        if alpha == df {
            return Ok(RieszConstant { d, alpha, value: -2.0 / pre, log_branch: true });
        }
        let value = gamma((df - alpha) / 2.0) / pre;
        Ok(RieszConstant { d, alpha, value, log_branch: false })
    }

    /// Coefficient s with K'(r) = s r^{alpha-d-1} on both branches.
    pub fn slope(&self) -> f64 {
        if self.log_branch {
            self.value
        } else {
            self.value * (self.alpha - self.d as f64)
        }
    }

    fn k0(&self, r: f64) -> f64 {
        if self.log_branch {
            self.value * r.ln()
        } else {
            self.value * r.powf(self.alpha - self.d as f64)
        }
    }

    fn k1(&self, r: f64) -> f64 {
        self.slope() * pow_fast(r, self.alpha - self.d as f64 - 1.0)
    }

    fn k2(&self, r: f64) -> f64 {
        let e = self.alpha - self.d as f64;
        self.slope() * (e - 1.0) * pow_fast(r, e - 2.0)
    }
}

/// Radial kernel interface used by the energy and flow code.
pub trait RadialKernel: Sync {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;

    /// W(0+) when finite.
    fn at_zero(&self) -> Option<f64>;

    /// Whether W(|x|) is locally integrable on R^d.
    fn integrable(&self, d: usize) -> bool;

    /// Sum of the absolute values of the terms making up the order-th
    /// derivative, the natural scale for relative comparisons.
    fn magnitude(&self, r: f64, order: u8) -> f64 {
        self.eval(r, order).abs()
    }

    fn eval(&self, r: f64, order: u8) -> f64 {
        match order {
            0 => self.value(r),
            1 => self.d1(r),
            _ => self.d2(r),
        }
    }

    /// Mean of W(|x|) over the cube [-h/2, h/2]^d.
    fn cell_average(&self, h: f64, d: usize) -> Result<f64> {
        if !self.integrable(d) {
            return Err(Error::Singularity(format!("kernel not integrable in d={d}")));
        }
        Ok(numeric_cell_average(|r| self.value(r), h, d))
    }
}

/// Average over [0, h/2]^d by peeling off the 2^d - 1 subcubes that avoid the
/// origin corner, level by level.
pub(crate) fn numeric_cell_average<F: Fn(f64) -> f64>(w: F, h: f64, d: usize) -> f64 {
    let g = GaussRule::new(10);
    let nodes: Vec<(f64, f64)> = g.nodes().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut s = 0.5 * h;
    let mut total = 0.0;
    let vol = s.powi(d as i32);
    for _ in 0..80 {
        let half = 0.5 * s;
        let mut level = 0.0;
        for corner in 1..(1usize << d) {
            let mut idx = vec![0usize; d];
            loop {
                let mut wt = 1.0;
                let mut r2 = 0.0;
                for k in 0..d {
                    let (x, w) = nodes[idx[k]];
                    let off = if corner >> k & 1 == 1 { half } else { 0.0 };
                    let c = off + half * x;
                    r2 += c * c;
                    wt *= w;
                }
                level += wt * w(r2.sqrt());
                let mut k = 0;
                while k < d {
                    idx[k] += 1;
                    if idx[k] < nodes.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
        }
        level *= half.powi(d as i32);
        total += level;
        s = half;
        if level.abs() <= 1e-18 * total.abs() && s < 1e-9 * h {
            break;
        }
    }
    total / vol
}

/// Integral of r^e/e over [0, s] (ln r for e = 0).
fn power_term_integral(e: f64, s: f64) -> f64 {
    if e == 0.0 {
        s * s.ln() - s
    } else {
        s.powf(e + 1.0) / (e * (e + 1.0))
    }
}

/// r^e with shortcuts for the exponents that dominate particle runs.
#[inline]
pub(crate) fn pow_fast(r: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        r
    } else if e == -1.0 {
        1.0 / r
    } else if e == 0.5 {
        r.sqrt()
    } else if e == -0.5 {
        1.0 / r.sqrt()
    } else if e.fract() == 0.0 && e.abs() < 16.0 {
        r.powi(e as i32)
    } else {
        r.powf(e)
    }
}

fn power_term(e: f64, r: f64) -> f64 {
    if e == 0.0 {
        r.ln()
    } else {
        r.powf(e) / e
    }
}

#[derive(Debug, Clone)]
pub struct HierKernel {
    pub d: usize,
    pub alpha: f64,
    pub riesz: RieszConstant,
    pub c2: f64,
    pub c_w: f64,
    /// (amplitude lambda^{(alpha-d)k}, width lambda^k)
    pub ladder: Vec<(f64, f64)>,
}

impl HierKernel {
    pub fn fourier_hat(&self, xi: f64) -> f64 {
        let df = self.d as f64;
        let mut s = 0.0;
        for &(amp, w) in &self.ladder {
            // lambda^{alpha k} = amp * w^d
            s += amp * w.powi(self.d as i32) * (-0.5 * (w * xi).powi(2)).exp();
        }
        xi.powf(-self.alpha) - (2.0 * PI).powf(df / 2.0) * self.c_w * s
    }
}

/// Ladder widths shrink with k, so every later Gaussian underflows once
/// r exceeds this many widths.
const GAUSS_CUTOFF: f64 = 40.0;

/// Evaluation-ready kernel built from a validated [`PotentialSpec`].
#[derive(Debug, Clone)]
pub enum Kernel {
    PowerLaw { a: f64, b: f64 },
    Hier(HierKernel),
    Cantor(Box<CantorKernel<f64>>),
    /// W = -r^b/b (or -ln r at b = 0); the pure attractive-sign test kernel.
    PurePower { b: f64 },
}

impl RadialKernel for Kernel {
    fn value(&self, r: f64) -> f64 {
        match self {
            Kernel::PowerLaw { a, b } => power_term(*a, r) - power_term(*b, r),
            Kernel::Hier(h) => {
                let mut v = h.riesz.k0(r) + 0.5 * h.c2 * r * r;
                for &(amp, w) in &h.ladder {
                    if r > GAUSS_CUTOFF * w {
                        break;
                    }
                    v -= h.c_w * amp * (-0.5 * (r / w).powi(2)).exp();
                }
                v
            }
            Kernel::Cantor(c) => c.w0(r),
            Kernel::PurePower { b } => -power_term(*b, r),
        }
    }

    fn d1(&self, r: f64) -> f64 {
        match self {
            Kernel::PowerLaw { a, b } => pow_fast(r, a - 1.0) - pow_fast(r, b - 1.0),
            Kernel::Hier(h) => {
                let mut v = h.riesz.k1(r) + h.c2 * r;
                for &(amp, w) in &h.ladder {
                    if r > GAUSS_CUTOFF * w {
                        break;
                    }
                    v += h.c_w * amp / (w * w) * r * (-0.5 * (r / w).powi(2)).exp();
                }
                v
            }
            Kernel::Cantor(c) => c.w1(r),
            Kernel::PurePower { b } => -pow_fast(r, b - 1.0),
        }
    }

    fn d2(&self, r: f64) -> f64 {
        match self {
            Kernel::PowerLaw { a, b } => (a - 1.0) * pow_fast(r, a - 2.0) - (b - 1.0) * pow_fast(r, b - 2.0),
            Kernel::Hier(h) => {
                let mut v = h.riesz.k2(r) + h.c2;
                for &(amp, w) in &h.ladder {
                    if r > GAUSS_CUTOFF * w {
                        break;
                    }
                    let q = (r / w).powi(2);
                    v += h.c_w * amp / (w * w) * (1.0 - q) * (-0.5 * q).exp();
                }
                v
            }
            Kernel::Cantor(c) => c.w2(r),
            Kernel::PurePower { b } => -(b - 1.0) * pow_fast(r, b - 2.0),
        }
    }

    fn at_zero(&self) -> Option<f64> {
        match self {
            Kernel::PowerLaw { b, .. } | Kernel::PurePower { b } => {
                if *b > 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Kernel::Hier(h) => {
                if h.riesz.log_branch || h.alpha < h.d as f64 {
                    None
                } else {
                    let v: f64 = h.ladder.iter().map(|&(amp, _)| amp).sum();
                    Some(-h.c_w * v)
                }
            }
            Kernel::Cantor(_) => Some(0.0),
        }
    }

    fn integrable(&self, d: usize) -> bool {
        match self {
            Kernel::PowerLaw { b, .. } | Kernel::PurePower { b } => *b > -(d as f64),
            Kernel::Hier(h) => h.alpha > 0.0,
            Kernel::Cantor(_) => true,
        }
    }

    fn magnitude(&self, r: f64, order: u8) -> f64 {
        let o = order as i32;
        let falling = |e: f64| -> f64 {
            // |d^o/dr^o r^e/e| with the log convention
            match o {
                0 => power_term(e, r).abs(),
                1 => r.powf(e - 1.0),
                _ => ((e - 1.0) * r.powf(e - 2.0)).abs(),
            }
        };
        match self {
            Kernel::PowerLaw { a, b } => falling(*a) + falling(*b),
            Kernel::PurePower { b } => falling(*b),
            Kernel::Hier(h) => {
                let rz = match o {
                    0 => h.riesz.k0(r).abs(),
                    1 => h.riesz.k1(r).abs(),
                    _ => h.riesz.k2(r).abs(),
                };
                let quad = match o {
                    0 => 0.5 * h.c2 * r * r,
                    1 => h.c2 * r,
                    _ => h.c2,
                };
                let mut g = 0.0;
                for &(amp, w) in &h.ladder {
                    if r > GAUSS_CUTOFF * w {
                        break;
                    }
                    let q = (r / w).powi(2);
                    let e = (-0.5 * q).exp();
                    g += h.c_w * amp * match o {
                        0 => e,
                        1 => r / (w * w) * e,
                        _ => (1.0 + q) / (w * w) * e,
                    };
                }
                rz + quad + g
            }
            Kernel::Cantor(c) => c.magnitude(r, order),
        }
    }

    fn cell_average(&self, h: f64, d: usize) -> Result<f64> {
        if !self.integrable(d) {
            return Err(Error::Singularity(format!("kernel not integrable in d={d}")));
        }
        let s = 0.5 * h;
        match self {
            Kernel::PowerLaw { a, b } if d == 1 => {
                Ok((power_term_integral(*a, s) - power_term_integral(*b, s)) / s)
            }
            Kernel::PurePower { b } if d == 1 => Ok(-power_term_integral(*b, s) / s),
            _ => Ok(numeric_cell_average(|r| self.value(r), h, d)),
        }
    }
}

/// eval with the radius precondition enforced.
pub fn eval(spec: &PotentialSpec, r: f64, order: u8) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("radius must be > 0, got {r}")));
    }
    if order > 2 {
        return param(format!("order must be 0, 1 or 2, got {order}"));
    }
    Ok(spec.kernel()?.eval(r, order))
}

/// Closed-form radial Fourier transform for the Riesz-based families.
pub fn fourier_hat(spec: &PotentialSpec, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("xi must be > 0, got {xi}")));
    }
    match spec.kernel()? {
        Kernel::Hier(h) => Ok(h.fourier_hat(xi)),
        _ => Err(Error::Unsupported(format!(
            "no closed-form transform for {spec:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub c_small: f64,
    pub c_big: f64,
    pub fractal_range_ok: bool,
}

/// Radii where W' changes sign, located on `samples` log-spaced points in
/// [lo, hi] and refined by bisection.
pub fn w1_sign_changes(spec: &PotentialSpec, lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || samples < 2 {
        return param(format!("need 0 < lo < hi and samples >= 2, got [{lo}, {hi}], {samples}"));
    }
    let k = spec.kernel()?;
    let rs = crate::quad::logspace(lo, hi, samples);
    let vals: Vec<f64> = rs.iter().map(|&r| k.d1(r)).collect();
    let mut roots = Vec::new();
    for i in 1..rs.len() {
        if (vals[i - 1] > 0.0) != (vals[i] > 0.0) {
            let r = crate::quad::bisect(rs[i - 1], rs[i], 1e-14 * rs[i], |r| k.d1(r))
                .unwrap_or(0.5 * (rs[i - 1] + rs[i]));
            roots.push(r);
        }
    }
    Ok(roots)
}

/// c(d, alpha), C(d, alpha) and the fractal-range gate.
pub fn thresholds(d: usize, alpha: f64) -> Result<Thresholds> {
    check_dim(d)?;
    let df = d as f64;
    let ok_range = if d == 1 {
        (alpha > 0.0 && alpha <= 1.0) || (2.0..3.0).contains(&alpha)
    } else {
        alpha > 0.0 && alpha < df + 2.0
    };
    if !ok_range {
        return Err(Error::Domain(format!("alpha={alpha} outside the admissible range for d={d}")));
    }
    let c_small = alpha.powf(-alpha / 2.0) * (alpha / 2.0).exp() * (2.0 * PI).powf(-df / 2.0);
    let rc = RieszConstant::new(d, alpha)?;
    let g = df + 2.0 - alpha;
    let c_big = (E / g).powf(g / 2.0) * (-rc.slope());
    let fractal_range_ok = if d == 1 {
        (2.0..3.0).contains(&alpha)
    } else {
        alpha > (df + 2.0) / 2.0 && alpha < df + 2.0
    };
    Ok(Thresholds { c_small, c_big, fractal_range_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hier(c_w: f64, c2: f64, k: usize) -> PotentialSpec {
        PotentialSpec::HierGauss { d: 2, alpha: 3.0, lambda: 0.15, c_w, k_trunc: k, c2 }
    }

    #[test]
    fn power_law_value() {
        let s = PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 2 };
        assert_relative_eq!(eval(&s, 1.0, 0).unwrap(), -0.5);
        assert!(eval(&s, 0.0, 0).is_err());
        assert!(eval(&s, -1.0, 1).is_err());
    }

    #[test]
    fn power_law_invariant() {
        assert!(PotentialSpec::PowerLaw { a: 1.0, b: 1.0, d: 2 }.validate().is_err());
        assert!(PotentialSpec::PowerLaw { a: 2.0, b: -2.0, d: 2 }.validate().is_err());
        assert!(PotentialSpec::PowerLaw { a: 2.0, b: -1.5, d: 2 }.validate().is_ok());
    }

    #[test]
    fn log_convention() {
        let s = PotentialSpec::PowerLaw { a: 2.0, b: 0.0, d: 2 };
        let r = 0.3f64;
        assert_relative_eq!(eval(&s, r, 0).unwrap(), r * r / 2.0 - r.ln(), max_relative = 1e-15);
        assert_relative_eq!(eval(&s, r, 1).unwrap(), r - 1.0 / r, max_relative = 1e-15);
    }

    #[test]
    fn riesz_constant_2_3() {
        // Gamma(-1/2) = -2 sqrt(pi): c = -2 sqrt(pi) / (pi * 8 * Gamma(3/2)) = -1/(2 pi)
        let c = RieszConstant::new(2, 3.0).unwrap();
        let gm = -2.0 * PI.sqrt();
        let oracle = gm / (PI * 8.0 * (PI.sqrt() / 2.0));
        assert_relative_eq!(c.value, oracle, max_relative = 1e-12);
        assert_relative_eq!(c.value, -1.0 / (2.0 * PI), max_relative = 1e-12);
    }

    #[test]
    fn riesz_constant_signs_and_log() {
        for d in 1..=3 {
            let df = d as f64;
            for i in 1..40 {
                let alpha = (df + 2.0) * i as f64 / 40.0;
                let c = RieszConstant::new(d, alpha).unwrap();
                if alpha < df {
                    assert!(c.value > 0.0, "d={d} alpha={alpha}");
                } else if alpha > df {
                    assert!(c.value < 0.0, "d={d} alpha={alpha}");
                }
            }
        }
        // 2D Newtonian: -(1/2pi) ln r
        let c = RieszConstant::new(2, 2.0).unwrap();
        assert!(c.log_branch);
        assert_relative_eq!(c.value, -1.0 / (2.0 * PI), max_relative = 1e-12);
        // the log branch is the limit of the repulsion strength c (d - alpha)
        let near = RieszConstant::new(2, 2.0 + 1e-7).unwrap();
        assert_relative_eq!(near.slope(), c.slope(), max_relative = 1e-5);
    }

    #[test]
    fn hier_reduces_to_riesz() {
        let rq = PotentialSpec::RieszQuad { d: 2, alpha: 3.0, c2: 0.0 }.kernel().unwrap();
        let mut hk = hier(0.25, 0.0, 7).kernel().unwrap();
        if let Kernel::Hier(h) = &mut hk {
            h.c_w = 0.0;
        }
        for &r in &[1e-4, 0.01, 0.3, 2.0] {
            for o in 0..3 {
                assert_eq!(rq.eval(r, o), hk.eval(r, o));
            }
        }
    }

    #[test]
    fn hier_domain_rules() {
        let bad = PotentialSpec::HierGauss { d: 1, alpha: 1.5, lambda: 0.1, c_w: 0.1, k_trunc: 3, c2: 0.0 };
        assert!(bad.validate().is_err());
        let bad = PotentialSpec::HierGauss { d: 2, alpha: 4.0, lambda: 0.1, c_w: 0.1, k_trunc: 3, c2: 0.0 };
        assert!(bad.validate().is_err());
        let bad = PotentialSpec::HierGauss { d: 2, alpha: 3.0, lambda: 1.0, c_w: 0.1, k_trunc: 3, c2: 0.0 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hier_w1_sign_changes() {
        // c_W = 0.25 sits close to C(2,3); each Gaussian well then lifts W'
        // above zero near r = lambda^j unless lambda is small
        let roots = w1_sign_changes(&hier(0.25, 0.2, 7), 1e-6, 10.0, 20000).unwrap();
        assert_eq!(roots.len(), 15);
        let small = PotentialSpec::HierGauss { d: 2, alpha: 3.0, lambda: 0.01, c_w: 0.25, k_trunc: 7, c2: 0.2 };
        let roots = w1_sign_changes(&small, 1e-6, 10.0, 20000).unwrap();
        assert_eq!(roots.len(), 1);
        let k = small.kernel().unwrap();
        assert!(k.d1(0.5 * roots[0]) < 0.0 && k.d1(2.0 * roots[0]) > 0.0);
        // smaller c_W leaves room for lambda = 0.15
        let roots = w1_sign_changes(&hier(0.1, 0.2, 7), 1e-6, 10.0, 20000).unwrap();
        assert_eq!(roots.len(), 1);
    }

    #[test]
    fn fourier_hat_cases() {
        let rq = PotentialSpec::RieszQuad { d: 2, alpha: 3.0, c2: 0.2 };
        assert_relative_eq!(fourier_hat(&rq, 2.0).unwrap(), 0.125, max_relative = 1e-15);
        let v = fourier_hat(&hier(0.25, 0.2, 7), 3f64.sqrt() * 0.15f64.powi(-3)).unwrap();
        assert!(v < 0.0);
        let pl = PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 2 };
        assert!(matches!(fourier_hat(&pl, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn fourier_hat_matches_direct_transform_1d() {
        // 1D check of the Gaussian normalization: the transform of
        // exp(-x^2/(2 s^2)) is sqrt(2 pi) s exp(-s^2 xi^2 / 2).
        let s = 0.3;
        let xi = 2.5;
        let g = GaussRule::new(40);
        let edges = crate::quad::linspace(-6.0, 6.0, 121);
        let direct = g.panels(&edges, |x| (-0.5 * (x / s).powi(2)).exp() * (xi * x).cos());
        let closed = (2.0 * PI).sqrt() * s * (-0.5 * (s * xi).powi(2)).exp();
        assert_relative_eq!(direct, closed, max_relative = 1e-12);
    }

    #[test]
    fn thresholds_2_3() {
        let t = thresholds(2, 3.0).unwrap();
        let c_oracle = 3f64.powf(-1.5) * 1.5f64.exp() / (2.0 * PI);
        let cb_oracle = E.sqrt() / (2.0 * PI);
        assert_relative_eq!(t.c_small, c_oracle, max_relative = 1e-12);
        assert_relative_eq!(t.c_big, cb_oracle, max_relative = 1e-12);
        assert!((t.c_small - 0.1373).abs() < 1e-4);
        assert!((t.c_big - 0.2624).abs() < 1e-4);
        assert!(t.fractal_range_ok);
        assert!(!thresholds(2, 1.5).unwrap().fractal_range_ok);
        assert!(thresholds(1, 1.5).is_err());
        assert!(thresholds(2, 4.0).is_err());
    }

    #[test]
    fn fractal_range_matches_threshold_order() {
        for d in 1..=3usize {
            let df = d as f64;
            for i in 1..200 {
                let alpha = (df + 2.0) * i as f64 / 200.0;
                let Ok(t) = thresholds(d, alpha) else { continue };
                if (alpha - (df + 2.0) / 2.0).abs() < 1e-9 || (d == 1 && alpha <= 1.0) {
                    continue;
                }
                assert_eq!(t.fractal_range_ok, t.c_small < t.c_big, "d={d} alpha={alpha}");
            }
        }
    }

    #[test]
    fn truncation_bound_values() {
        let b = hier(0.25, 0.2, 7).truncation_bound().unwrap();
        assert_relative_eq!(b, 0.15f64.powi(8) / 0.85, max_relative = 1e-12);
    }

    #[test]
    fn serde_round_trip_and_field_names() {
        let s = hier(0.25, 0.2, 7);
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["family"], "hier_gauss");
        for f in ["d", "alpha", "lambda", "c_w", "k_trunc", "c2"] {
            assert!(j.get(f).is_some(), "{f}");
        }
        let back: PotentialSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        let c: PotentialSpec = serde_json::from_str(
            r#"{"family":"cantor_potential","m_ratio":12,"alpha":5,"cantor_level":3}"#,
        )
        .unwrap();
        assert_eq!(c, PotentialSpec::CantorPotential { m_ratio: 12.0, alpha: 5.0, cantor_level: 3 });
    }

    #[test]
    fn cell_average_closed_form_matches_numeric() {
        let k = Kernel::PowerLaw { a: 2.0, b: 0.5 };
        let h = 0.1;
        let closed = k.cell_average(h, 1).unwrap();
        let num = numeric_cell_average(|r| k.value(r), h, 1);
        assert_relative_eq!(closed, num, max_relative = 1e-10);
        // -|x| averaged over [-h/2, h/2] is -h/4
        let p = Kernel::PurePower { b: 1.0 };
        assert_relative_eq!(p.cell_average(h, 1).unwrap(), -h / 4.0, max_relative = 1e-14);
        assert_relative_eq!(numeric_cell_average(|r| -r, h, 1), -h / 4.0, max_relative = 1e-12);
        // r^2/2 over a square: (h^2/12)
        let v = numeric_cell_average(|r| 0.5 * r * r, h, 2);
        assert_relative_eq!(v, h * h / 12.0, max_relative = 1e-12);
        // log singularity in 2D: mean of ln r over the unit square [-1/2,1/2]^2
        let v = numeric_cell_average(|r| r.ln(), 1.0, 2);
        let oracle = crate::quad::tanh_sinh(0.0, 0.5, 7, |x, _, _| {
            crate::quad::tanh_sinh(0.0, 0.5, 7, |y, _, _| (x * x + y * y).sqrt().ln())
        }) * 4.0;
        assert_relative_eq!(v, oracle, max_relative = 1e-9);
    }

    fn fd_check(k: &Kernel, r: f64, order: u8) -> (f64, f64) {
        let h = 1e-3 * r;
        let f = |x: f64| k.eval(x, order);
        let fd = (8.0 * (f(r + h) - f(r - h)) - (f(r + 2.0 * h) - f(r - 2.0 * h))) / (12.0 * h);
        let exact = k.eval(r, order + 1);
        let scale = k.magnitude(r, order + 1).max(k.magnitude(r, order) / r);
        ((fd - exact).abs() / scale, exact)
    }

    proptest! {
        #[test]
        fn prop_power_law_gradients(a in 0.5f64..4.0, gap in 0.1f64..2.0, r in 0.05f64..5.0) {
            let b = (a - gap).max(-1.9);
            let k = PotentialSpec::PowerLaw { a, b, d: 2 }.kernel().unwrap();
            for o in 0..2 {
                let (e, _) = fd_check(&k, r, o);
                prop_assert!(e < 1e-6, "order {} err {}", o, e);
            }
        }

        #[test]
        fn prop_hier_gradients(alpha in 2.2f64..3.9, c_w in 0.01f64..1.0, r in 1e-3f64..5.0) {
            let k = PotentialSpec::HierGauss { d: 2, alpha, lambda: 0.15, c_w, k_trunc: 5, c2: 0.2 }
                .kernel().unwrap();
            for o in 0..2 {
                let (e, _) = fd_check(&k, r, o);
                prop_assert!(e < 1e-6, "order {} err {}", o, e);
            }
        }

        #[test]
        fn prop_fourier_hat_decreasing_in_cw(c1 in 0.01f64..1.0, dc in 0.001f64..1.0, xi in 0.5f64..1e5) {
            let a = fourier_hat(&hier(c1, 0.2, 7), xi).unwrap();
            let b = fourier_hat(&hier(c1 + dc, 0.2, 7), xi).unwrap();
            prop_assert!(b < a);
        }
    }
}
