//! Explicit radial minimizers of the power-law energy for a = 2 and a = 4.

use crate::error::{param, Error, Result};
use crate::measure::GridMeasure;
use crate::quad::{bisect, tanh_sinh, GaussRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

const LEVEL: u32 = 5;

/// rho(r) = sum_i coef_i (R^2 - r^2)^{e_i} on |x| < R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitMinimizer {
    pub d: usize,
    pub a: f64,
    pub b: f64,
    pub radius: f64,
    /// A for a = 2, A1 for a = 4
    pub amplitude: f64,
    /// A2 for a = 4, zero for a = 2
    pub amplitude2: f64,
    /// 1 - (b + d)/2
    pub exponent: f64,
    pub terms: Vec<(f64, f64)>,
}

fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// int_0^R r^{d-1} (R^2 - r^2)^e dr
fn radial_moment(d: usize, e: f64, r: f64) -> f64 {
    0.5 * r.powf(d as f64 + 2.0 * e) * beta(d as f64 / 2.0, e + 1.0)
}

pub fn explicit_minimizer(d: usize, a: f64, b: f64) -> Result<ExplicitMinimizer> {
    if !(1..=3).contains(&d) {
        return param(format!("dimension must be 1, 2 or 3, got {d}"));
    }
    let df = d as f64;
    let p = 1.0 - (b + df) / 2.0;
    if a == 2.0 {
        let hi = (4.0 - df).min(2.0);
        if !(b > 2.0 - df && b < hi) {
            return Err(Error::Domain(format!("a=2 needs {} < b < {hi}, got b={b}", 2.0 - df)));
        }
        let amp = -df * gamma(df / 2.0) * ((b + df) * PI / 2.0).sin()
            / ((b + df - 2.0) * PI.powf(df / 2.0 + 1.0));
        // unit mass fixes R; the closed form R^{d+2p} is monotone in R
        let area = sphere_area(d);
        let mass = |r: f64| {
            area * amp
                * tanh_sinh(0.0, r, 7, |t, _, db| t.powi(d as i32 - 1) * (db * (2.0 * r - db)).powf(p))
        };
        let radius = bisect(1e-6, 1e6, 1e-15, |r| mass(r) - 1.0)?;
        return Ok(ExplicitMinimizer {
            d,
            a,
            b,
            radius,
            amplitude: amp,
            amplitude2: 0.0,
            exponent: p,
            terms: vec![(amp, p)],
        });
    }
    if a == 4.0 {
        let bbar = (2.0 + 2.0 * df - df * df) / (df + 1.0);
        if !(b > 2.0 - df && b < bbar) {
            return Err(Error::Domain(format!("a=4 needs {} < b < {bbar}, got b={b}", 2.0 - df)));
        }
        return solve_quartic(d, b, p);
    }
    Err(Error::Domain(format!("explicit minimizers exist for a in {{2, 4}}, got a={a}")))
}

/// Attractive and repulsive parts of V'(sigma) for the unit-radius basis
/// density (1 - r^2)^e.
fn unit_parts(d: usize, a: f64, b: f64, e: f64, sigma: f64) -> (f64, f64) {
    let terms = [(1.0, e)];
    let att = field_part(d, 1.0, &terms, a - 1.0, sigma);
    let rep = field_part(d, 1.0, &terms, b - 1.0, sigma);
    (att, rep)
}

fn solve_quartic(d: usize, b: f64, p: f64) -> Result<ExplicitMinimizer> {
    // basis 1: R^2 (R^2 - r^2)^p, basis 2: (R^2 - r^2)^{p+1}; at R = 1 both
    // reduce to (1 - r^2)^e. V'(sigma R) = R^{2p+2+d} (R^3 P - R^{b-1} Q) v,
    // so with lambda = R^{4-b} the collocation condition is det(lambda P - Q) = 0.
    let exps = [p, p + 1.0];
    let colloc = [0.35, 0.75];
    let checks = [0.15, 0.55, 0.9];
    let parts = |s: f64| -> [(f64, f64); 2] { [unit_parts(d, 4.0, b, exps[0], s), unit_parts(d, 4.0, b, exps[1], s)] };
    let at_c: Vec<[(f64, f64); 2]> = colloc.iter().map(|&s| parts(s)).collect();
    let pm = |i: usize, j: usize| at_c[i][j].0;
    let qm = |i: usize, j: usize| at_c[i][j].1;
    let det_p = pm(0, 0) * pm(1, 1) - pm(0, 1) * pm(1, 0);
    let det_q = qm(0, 0) * qm(1, 1) - qm(0, 1) * qm(1, 0);
    let mid = pm(0, 0) * qm(1, 1) + qm(0, 0) * pm(1, 1) - pm(0, 1) * qm(1, 0) - qm(0, 1) * pm(1, 0);
    let disc = mid * mid - 4.0 * det_p * det_q;
    if disc < 0.0 || det_p == 0.0 {
        return Err(Error::NoConvergence("collocation system has no real root".into()));
    }
    let sq = disc.sqrt();
    let roots = [(mid + sq) / (2.0 * det_p), (mid - sq) / (2.0 * det_p)];
    let at_chk: Vec<[(f64, f64); 2]> = checks.iter().map(|&s| parts(s)).collect();
    let masses = [
        sphere_area(d) * radial_moment(d, exps[0], 1.0),
        sphere_area(d) * radial_moment(d, exps[1], 1.0),
    ];
    let mut best: Option<(f64, f64, [f64; 2])> = None;
    for &lam in &roots {
        if !(lam > 0.0) {
            continue;
        }
        let m = |i: usize, j: usize| lam * pm(i, j) - qm(i, j);
        let (v0, v1) = if m(0, 0).abs() + m(0, 1).abs() >= m(1, 0).abs() + m(1, 1).abs() {
            (-m(0, 1), m(0, 0))
        } else {
            (m(1, 1), -m(1, 0))
        };
        let mut resid: f64 = 0.0;
        for c in &at_chk {
            let num = v0 * (lam * c[0].0 - c[0].1) + v1 * (lam * c[1].0 - c[1].1);
            let den = v0.abs() * (lam * c[0].0.abs() + c[0].1.abs()) + v1.abs() * (lam * c[1].0.abs() + c[1].1.abs());
            resid = resid.max(num.abs() / den);
        }
        let norm = v0 * masses[0] + v1 * masses[1];
        if norm == 0.0 {
            continue;
        }
        let v = [v0 / norm, v1 / norm];
        // positivity: A1 >= 0 at the edge, A1 + A2 >= 0 at the center
        if v[0] < 0.0 || v[0] + v[1] < 0.0 {
            continue;
        }
        if best.as_ref().map_or(true, |bst| resid < bst.1) {
            best = Some((lam, resid, v));
        }
    }
    let (lam, _, v) = best.ok_or_else(|| Error::NoConvergence("no admissible collocation root".into()))?;
    let radius = lam.powf(1.0 / (4.0 - b));
    let df = d as f64;
    let scale = radius.powf(-(2.0 * p + 2.0 + df));
    let a1 = v[0] * scale;
    let a2 = v[1] * scale;
    Ok(ExplicitMinimizer {
        d,
        a: 4.0,
        b,
        radius,
        amplitude: a1,
        amplitude2: a2,
        exponent: p,
        terms: vec![(a1 * radius * radius, p), (a2, p + 1.0)],
    })
}

/// Angular kernel for K(q) = q^m: the radial component at distance s of the
/// force from a unit-density shell of radius t. `dst` is s - t.
fn angular(d: usize, m: f64, s: f64, t: f64, dst: f64) -> f64 {
    let pw = (m - 1.0) / 2.0;
    match d {
        1 => {
            let near = if dst == 0.0 { 0.0 } else { dst.abs().powf(m) * dst.signum() };
            near + (s + t).powf(m)
        }
        _ => {
            let f = |th: f64| {
                let sh = (0.5 * th).sin();
                let sh2 = sh * sh;
                let q2 = dst * dst + 4.0 * s * t * sh2;
                if q2 == 0.0 {
                    return 0.0;
                }
                q2.powf(pw) * (dst + 2.0 * t * sh2)
            };
            if d == 2 {
                2.0 * tanh_sinh(0.0, PI, LEVEL, |th, _, _| f(th))
            } else {
                2.0 * PI * tanh_sinh(0.0, PI, LEVEL, |th, _, _| f(th) * th.sin())
            }
        }
    }
}

/// V'(s) contribution of kernel q^m against sum_i coef_i (R^2 - t^2)^{e_i}.
fn field_part(d: usize, r: f64, terms: &[(f64, f64)], m: f64, s: f64) -> f64 {
    let dens = |gap: f64, t: f64| -> f64 {
        let w = gap * (2.0 * r - gap);
        terms.iter().map(|&(c, e)| c * w.powf(e)).sum::<f64>() * t.powi(d as i32 - 1)
    };
    if s > 0.0 && s < r {
        let left = tanh_sinh(0.0, s, LEVEL, |t, _, db| dens(r - t, t) * angular(d, m, s, t, db));
        let right = tanh_sinh(s, r, LEVEL, |t, da, db| dens(db, t) * angular(d, m, s, t, -da));
        left + right
    } else {
        tanh_sinh(0.0, r, LEVEL, |t, _, db| dens(db, t) * angular(d, m, s, t, s - t))
    }
}

/// int_0^y (c^2 - u^2)^q du for 0 <= y <= c.
fn chord_integral(q: f64, y: f64, c: f64) -> f64 {
    if c <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    let z = (y / c).min(1.0);
    c.powf(2.0 * q + 1.0) * 0.5 * beta(0.5, q + 1.0) * beta_reg(0.5, q + 1.0, z * z)
}

impl ExplicitMinimizer {
    pub fn density(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let w = (self.radius - r) * (self.radius + r);
        self.terms.iter().map(|&(c, e)| c * w.powf(e)).sum()
    }

    /// Closed-form total mass.
    pub fn mass(&self) -> f64 {
        sphere_area(self.d)
            * self.terms.iter().map(|&(c, e)| c * radial_moment(self.d, e, self.radius)).sum::<f64>()
    }

    /// Radial derivative of V = W * rho at distance s from the center.
    pub fn radial_field(&self, s: f64) -> f64 {
        let att = field_part(self.d, self.radius, &self.terms, self.a - 1.0, s);
        let rep = field_part(self.d, self.radius, &self.terms, self.b - 1.0, s);
        att - rep
    }

    /// Cell masses on a centered grid of cell size h, normalized to 1.
    pub fn to_grid(&self, h: f64) -> Result<GridMeasure> {
        if !(h > 0.0 && h < self.radius) {
            return param(format!("cell size must lie in (0, R), got {h}"));
        }
        let half = (self.radius / h - 1e-9).ceil() as usize;
        let n = 2 * half;
        let o = -(half as f64) * h;
        let r = self.radius;
        let values: Vec<f64> = match self.d {
            1 => (0..n)
                .map(|i| {
                    let x0 = o + i as f64 * h;
                    self.cum_1d(x0 + h) - self.cum_1d(x0)
                })
                .collect(),
            2 => {
                let g = GaussRule::new(5);
                (0..n * n)
                    .into_par_iter()
                    .map(|lin| {
                        let x0 = o + (lin % n) as f64 * h;
                        let y0 = o + (lin / n) as f64 * h;
                        let near = dist_to_box(0.0, x0, x0 + h).hypot(dist_to_box(0.0, y0, y0 + h));
                        let far = x0.abs().max((x0 + h).abs()).hypot(y0.abs().max((y0 + h).abs()));
                        if near >= r {
                            0.0
                        } else if far < r - 8.0 * h {
                            g.integrate(y0, y0 + h, |y| g.integrate(x0, x0 + h, |x| self.density(x.hypot(y))))
                        } else {
                            self.edge_cell(x0, x0 + h, y0, y0 + h)
                        }
                    })
                    .collect()
            }
            _ => return Err(Error::Unsupported("grid sampling is implemented for d <= 2".into())),
        };
        let total: f64 = values.iter().sum();
        let ext = vec![n; self.d];
        GridMeasure::new(vec![o; self.d], h, ext, values.iter().map(|v| v / total).collect())
    }

    /// int_0^x rho in one dimension (odd in x).
    fn cum_1d(&self, x: f64) -> f64 {
        let c = self.radius;
        let y = x.abs().min(c);
        x.signum() * self.terms.iter().map(|&(k, e)| k * chord_integral(e, y, c)).sum::<f64>()
    }

    /// int_0^x rho(sqrt(u^2 + t^2)) du (odd in x).
    fn chord(&self, x: f64, t: f64) -> f64 {
        let r = self.radius;
        if t.abs() >= r {
            return 0.0;
        }
        let c = ((r - t.abs()) * (r + t.abs())).sqrt();
        let y = x.abs().min(c);
        x.signum() * self.terms.iter().map(|&(k, e)| k * chord_integral(e, y, c)).sum::<f64>()
    }

    fn edge_cell(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let r = self.radius;
        let lo = y0.max(-r);
        let hi = y1.min(r);
        if lo >= hi {
            return 0.0;
        }
        let mut cuts = vec![lo, hi, 0.0];
        for x in [x0, x1] {
            if x.abs() < r {
                let t = ((r - x.abs()) * (r + x.abs())).sqrt();
                cuts.push(t);
                cuts.push(-t);
            }
        }
        cuts.retain(|&t| t >= lo && t <= hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        cuts.windows(2)
            .map(|w| tanh_sinh(w[0], w[1], LEVEL, |t, _, _| self.chord(x1, t) - self.chord(x0, t)))
            .sum()
    }
}

fn dist_to_box(p: f64, lo: f64, hi: f64) -> f64 {
    if p < lo {
        lo - p
    } else if p > hi {
        p - hi
    } else {
        0.0
    }
}
