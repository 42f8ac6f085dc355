//! Fourier-side concavity diagnostics: negative windows of W-hat, concavity
//! witnesses built from bump pairs on those windows, and the FLIC band form.

use crate::energy::grid_energy;
use crate::error::{param, Error, Result};
use crate::measure::{mu_hat_grid, GridMeasure};
use crate::potential::{fourier_hat, PotentialSpec};
use crate::quad::{bisect, logspace, tanh_sinh, GaussRule};
use num::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Lower end of every window scan.
pub const XI_MIN: f64 = 1e-3;
/// Cells per axis of a witness grid.
pub const WITNESS_CELLS: usize = 256;

/// One maximal run of negative W-hat samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub center: f64,
    pub min_value: f64,
    pub argmin: f64,
    /// sub-interval where W-hat <= min_value / 2
    pub core_lo: f64,
    pub core_hi: f64,
    /// (-min_value/2) |core|^alpha, so that sup over the core is below -c1 |core|^{-alpha}
    pub c1: f64,
    /// ladder index j with sqrt(alpha) lambda^{-j} nearest the center
    pub nearest_j: Option<usize>,
    pub predicted_center: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScan {
    pub spec: PotentialSpec,
    pub xi_min: f64,
    pub xi_max: f64,
    pub samples: usize,
    pub windows: Vec<Window>,
}

fn alpha_of(spec: &PotentialSpec) -> f64 {
    match *spec {
        PotentialSpec::RieszQuad { alpha, .. } | PotentialSpec::HierGauss { alpha, .. } => alpha,
        _ => f64::NAN,
    }
}

pub fn scan_windows(spec: &PotentialSpec, xi_max: f64, samples: usize) -> Result<WindowScan> {
    if !(xi_max > XI_MIN) || samples < 3 {
        return param(format!("need xi_max > {XI_MIN} and samples >= 3, got {xi_max}, {samples}"));
    }
    fourier_hat(spec, 1.0)?;
    let xs = logspace(XI_MIN, xi_max, samples);
    let vals: Vec<f64> = xs.par_iter().map(|&x| fourier_hat(spec, x).unwrap_or(f64::NAN)).collect();
    let wh = |x: f64| fourier_hat(spec, x).unwrap_or(f64::NAN);
    let alpha = alpha_of(spec);
    let mut windows = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        if !(vals[i] < 0.0) {
            i += 1;
            continue;
        }
        let start = i;
        while i < xs.len() && vals[i] < 0.0 {
            i += 1;
        }
        let end = i - 1;
        let lo = if start == 0 {
            xs[0]
        } else {
            bisect(xs[start - 1], xs[start], 1e-13 * xs[start], wh)?
        };
        let hi = if end + 1 == xs.len() {
            xs[end]
        } else {
            bisect(xs[end], xs[end + 1], 1e-13 * xs[end], wh)?
        };
        let (mut am, mut mv) = (start, vals[start]);
        for j in start..=end {
            if vals[j] < mv {
                mv = vals[j];
                am = j;
            }
        }
        let (mut cl, mut ch) = (am, am);
        while cl > start && vals[cl - 1] <= 0.5 * mv {
            cl -= 1;
        }
        while ch < end && vals[ch + 1] <= 0.5 * mv {
            ch += 1;
        }
        let core_w = xs[ch] - xs[cl];
        let center = 0.5 * (lo + hi);
        let (nearest_j, predicted_center) = match *spec {
            PotentialSpec::HierGauss { lambda, k_trunc, .. } if k_trunc > 0 => {
                let j = ((center / alpha.sqrt()).ln() / (1.0 / lambda).ln()).round().clamp(1.0, k_trunc as f64) as usize;
                (Some(j), Some(alpha.sqrt() * lambda.powi(-(j as i32))))
            }
            _ => (None, None),
        };
        windows.push(Window {
            lo,
            hi,
            width: hi - lo,
            center,
            min_value: mv,
            argmin: xs[am],
            core_lo: xs[cl],
            core_hi: xs[ch],
            c1: -0.5 * mv * core_w.powf(alpha),
            nearest_j,
            predicted_center,
        });
    }
    Ok(WindowScan { spec: spec.clone(), xi_min: XI_MIN, xi_max, samples, windows })
}

/// J0 by its power series for small arguments and the Hankel expansion
/// otherwise.
pub(crate) fn bessel_j0(z: f64) -> f64 {
    let z = z.abs();
    if z > 8.0 && z < 25.0 {
        // trapezoid on the periodic integral form is spectrally accurate
        let n = 96;
        let mut s = 0.0;
        for i in 0..n {
            let t = PI * (i as f64 + 0.5) / n as f64;
            s += (z * t.sin()).cos();
        }
        return s / n as f64;
    }
    if z <= 8.0 {
        let q = -0.25 * z * z;
        let mut term = 1.0;
        let mut s = 1.0;
        for k in 1..200 {
            term *= q / ((k * k) as f64);
            s += term;
            if term.abs() < 1e-17 * s.abs().max(1e-300) {
                break;
            }
        }
        return s;
    }
    let y = 1.0 / (8.0 * z);
    // P = sum (-1)^k a_{2k} y^{2k}, Q = sum (-1)^{k+1} a_{2k+1} y^{2k+1},
    // a_n = prod_{i<=n} (2i-1)^2 / n!
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for n in 0..60 {
        if n > 0 {
            let t = (2 * n - 1) as f64;
            a *= t * t / n as f64 * y;
        }
        if a > prev {
            break;
        }
        prev = a;
        match n % 4 {
            0 => p += a,
            1 => q -= a,
            2 => p -= a,
            _ => q += a,
        }
    }
    let chi = z - 0.25 * PI;
    (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Mollifier exp(-1/(1 - |4 eta|^2)) on |eta| < 1/4, unnormalized.
fn bump(s: f64) -> f64 {
    let u = 16.0 * s * s;
    if u >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u)).exp()
    }
}

/// Radial bump profile phi (unit integral) and its inverse transform.
struct BumpTransform {
    d: usize,
    norm: f64,
    rule: GaussRule,
}

impl BumpTransform {
    fn new(d: usize) -> Self {
        let rule = GaussRule::new(32);
        let raw = match d {
            1 => 2.0 * tanh_sinh(0.0, 0.25, 7, |s, _, _| bump(s)),
            _ => 2.0 * PI * tanh_sinh(0.0, 0.25, 7, |s, _, _| bump(s) * s),
        };
        BumpTransform { d, norm: 1.0 / raw, rule }
    }

    /// (2 pi)^{-d} int phi(eta) e^{i y.eta} d eta at |y| = rho.
    fn inverse(&self, rho: f64) -> f64 {
        let panels = 8 + (rho * 0.25 / PI).ceil() as usize;
        let edges: Vec<f64> = (0..=panels).map(|i| 0.25 * i as f64 / panels as f64).collect();
        match self.d {
            1 => self.norm / PI * self.rule.panels(&edges, |s| bump(s) * (rho * s).cos()),
            _ => self.norm / (2.0 * PI) * self.rule.panels(&edges, |s| bump(s) * bessel_j0(rho * s) * s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessAttempt {
    pub center: f64,
    pub width: f64,
    pub energy: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityWitness {
    pub delta: f64,
    pub h: f64,
    pub grid: GridMeasure,
    pub energy: f64,
    pub window: Window,
    /// R, the window width used as the bump scale
    pub bump_scale: f64,
    pub xi_j: f64,
    pub cells_inside: usize,
    /// |sum mu| / sum |mu|
    pub mean_residual: f64,
    /// exact diameter of the union of support cells
    pub diameter: f64,
    /// max |Im mu_1| / max |mu_1|
    pub imag_residue: f64,
    pub attempts: Vec<WitnessAttempt>,
}

/// The witness grid for one window; returns (grid, cells inside, diameter,
/// imaginary residue).
fn witness_grid(d: usize, delta: f64, window: &Window) -> (GridMeasure, usize, f64, f64) {
    let n = WITNESS_CELLS;
    let h = delta / n as f64;
    let o = -0.5 * delta;
    let r_scale = window.width;
    let xi = window.center;
    let bt = BumpTransform::new(d);
    let total = n.pow(d as u32);
    let rad = 0.5 * delta;
    let cells: Vec<(f64, f64, f64)> = (0..total)
        .into_par_iter()
        .map(|lin| {
            let mut c = [0.0; 2];
            let mut far2 = 0.0;
            let mut l = lin;
            for k in (0..d).rev() {
                let i = l % n;
                l /= n;
                let lo = o + i as f64 * h;
                c[k] = lo + 0.5 * h;
                let f = lo.abs().max((lo + h).abs());
                far2 += f * f;
            }
            let far = far2.sqrt();
            if far > rad {
                return (0.0, 0.0, 0.0);
            }
            let r = c[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            let g = r_scale.powi(d as i32) * bt.inverse(r_scale * r);
            // the two bumps at +/- xi e_1
            let plus = Complex::from_polar(g, xi * c[0]);
            let minus = Complex::from_polar(g, -xi * c[0]);
            let v = plus + minus;
            (v.re, v.im.abs(), far)
        })
        .collect();
    let inside: Vec<bool> = (0..total).map(|i| cells[i].2 > 0.0).collect();
    let n_in = inside.iter().filter(|&&b| b).count();
    let cell_vol = h.powi(d as i32);
    let mut values: Vec<f64> = cells.iter().zip(&inside).map(|(c, &b)| if b { c.0 * cell_vol } else { 0.0 }).collect();
    for _ in 0..2 {
        let s: f64 = values.iter().sum();
        let shift = s / n_in as f64;
        for (v, &b) in values.iter_mut().zip(&inside) {
            if b {
                *v -= shift;
            }
        }
    }
    let max_re = cells.iter().map(|c| c.0.abs()).fold(0.0, f64::max);
    let max_im = cells.iter().map(|c| c.1).fold(0.0, f64::max);
    let diameter = 2.0 * cells.iter().map(|c| c.2).fold(0.0, f64::max);
    let grid = GridMeasure::new(vec![o; d], h, vec![n; d], values).expect("consistent grid");
    let imag = if max_re > 0.0 { max_im / max_re } else { 0.0 };
    (grid, n_in, diameter, imag)
}

/// Try windows of increasing frequency, starting with the first whose width
/// is at least 4 pi / delta, until the witness energy is negative.
pub fn build_witness(spec: &PotentialSpec, delta: f64, scan: &WindowScan) -> Result<ConcavityWitness> {
    if !(delta > 0.0 && delta.is_finite()) {
        return param(format!("delta must be positive, got {delta}"));
    }
    let d = spec.dim();
    if d > 2 {
        return Err(Error::Unsupported("witness grids are built for d <= 2".into()));
    }
    let kernel = spec.kernel()?;
    let h = delta / WITNESS_CELLS as f64;
    let mut wins: Vec<&Window> = scan.windows.iter().collect();
    wins.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    let r_min = 4.0 * PI / delta;
    let mut attempts = Vec::new();
    for w in wins.into_iter().filter(|w| w.width >= r_min) {
        // oscillation and bump must be resolved by the grid
        if (w.center + 0.5 * w.width) * h > 0.5 * PI {
            attempts.push(WitnessAttempt {
                center: w.center,
                width: w.width,
                energy: None,
                note: "window frequency not resolved by the witness grid".into(),
            });
            break;
        }
        let (grid, n_in, diameter, imag) = witness_grid(d, delta, w);
        let e = grid_energy(&kernel, &grid)?;
        attempts.push(WitnessAttempt { center: w.center, width: w.width, energy: Some(e), note: String::new() });
        if e < 0.0 {
            let tv = grid.total_variation();
            let mean_residual = grid.total_mass().abs() / tv;
            return Ok(ConcavityWitness {
                delta,
                h,
                energy: e,
                window: w.clone(),
                bump_scale: w.width,
                xi_j: w.center,
                cells_inside: n_in,
                mean_residual,
                diameter,
                imag_residue: imag,
                attempts,
                grid,
            });
        }
    }
    Err(Error::WitnessNotFound(format!(
        "no window gave negative energy at delta={delta}; attempts: {}",
        serde_json::to_string(&attempts).unwrap_or_default()
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlicForm {
    pub band: (f64, f64),
    /// int over r <= |xi| <= R of |mu_hat|^2
    pub band_integral: f64,
    pub energy: f64,
    /// energy / band_integral, absent when the band integral vanishes
    pub ratio: Option<f64>,
}

pub fn flic_form(spec: &PotentialSpec, mu: &GridMeasure, band: (f64, f64)) -> Result<FlicForm> {
    let (r, big) = band;
    if !(r >= 0.0 && big > r) {
        return param(format!("band must satisfy 0 <= r < R, got ({r}, {big})"));
    }
    let d = mu.dim();
    if d != spec.dim() {
        return Err(Error::Dimension { expected: spec.dim(), got: d });
    }
    if d > 2 {
        return Err(Error::Unsupported("band integrals are implemented for d <= 2".into()));
    }
    let kernel = spec.kernel()?;
    let energy = if mu.values.iter().all(|&v| v == 0.0) { 0.0 } else { grid_energy(&kernel, mu)? };
    let span = mu.h * mu.extents.iter().map(|&n| (n * n) as f64).sum::<f64>().sqrt();
    let g = GaussRule::new(8);
    let nr = 2 + ((big - r) * span / PI).ceil() as usize;
    let edges: Vec<f64> = (0..=nr).map(|i| r + (big - r) * i as f64 / nr as f64).collect();
    let radial = |xi: f64| -> f64 {
        if d == 1 {
            // |mu_hat| is even for real mu
            2.0 * mu_hat_grid(mu, &[xi]).norm_sqr()
        } else {
            let nt = 4 + (xi * span / PI).ceil() as usize;
            let te: Vec<f64> = (0..=nt).map(|i| PI * i as f64 / nt as f64).collect();
            2.0 * xi * g.panels(&te, |t| mu_hat_grid(mu, &[xi * t.cos(), xi * t.sin()]).norm_sqr())
        }
    };
    let band_integral: f64 = edges.par_windows(2).map(|e| g.integrate(e[0], e[1], radial)).sum();
    let ratio = if band_integral > 0.0 { Some(energy / band_integral) } else { None };
    Ok(FlicForm { band, band_integral, energy, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hier(lambda: f64, c_w: f64) -> PotentialSpec {
        PotentialSpec::HierGauss { d: 2, alpha: 3.0, lambda, c_w, k_trunc: 7, c2: 0.2 }
    }

    #[test]
    fn j0_matches_integral_form() {
        for &z in &[0.0, 0.5, 2.404825557695773, 7.0, 19.9, 20.1, 35.0, 120.0] {
            let direct = tanh_sinh(0.0, PI, 8, |t, _, _| (z * t.sin()).cos()) / PI;
            assert!((bessel_j0(z) - direct).abs() < 1e-12, "z={z}: {} vs {direct}", bessel_j0(z));
        }
    }

    #[test]
    fn riesz_has_no_windows() {
        let s = PotentialSpec::RieszQuad { d: 2, alpha: 3.0, c2: 0.2 };
        assert!(scan_windows(&s, 1e4, 2000).unwrap().windows.is_empty());
    }

    #[test]
    fn windows_sit_at_predicted_scales() {
        let lambda: f64 = 0.15;
        let scan = scan_windows(&hier(lambda, 0.25), 2e6, 200_000).unwrap();
        for j in 1..=7 {
            let s = lambda.powi(-j);
            let (a, b) = ((3f64.sqrt() - 0.2) * s, (3f64.sqrt() + 0.2) * s);
            assert!(
                scan.windows.iter().any(|w| w.lo <= b && w.hi >= a),
                "no window near j={j}"
            );
        }
        for w in &scan.windows {
            assert!(w.min_value < 0.0 && w.c1 > 0.0 && w.lo < w.hi);
        }
    }

    #[test]
    fn unsupported_spec_rejected() {
        let s = PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 2 };
        assert!(scan_windows(&s, 10.0, 100).is_err());
    }

    #[test]
    fn bump_transform_at_origin_is_mass() {
        // (2 pi)^{-d} int phi = (2 pi)^{-d}
        for d in 1..=2 {
            let bt = BumpTransform::new(d);
            let want = (2.0 * PI).powi(-(d as i32));
            assert!((bt.inverse(0.0) / want - 1.0).abs() < 1e-12, "{} {want}", bt.inverse(0.0));
        }
    }

    #[test]
    fn witness_is_mean_zero_and_negative() {
        let spec = hier(0.15, 0.25);
        let scan = scan_windows(&spec, 2e6, 200_000).unwrap();
        let w = build_witness(&spec, 1.0, &scan).unwrap();
        assert!(w.energy < 0.0);
        assert!(w.mean_residual <= 1e-12);
        assert!(w.diameter <= 1.0);
        assert!(w.imag_residue <= 1e-10);
        // translation by one cell leaves the grid energy unchanged
        let mut shifted = w.grid.clone();
        shifted.origin[0] += w.h;
        let e2 = grid_energy(&spec.kernel().unwrap(), &shifted).unwrap();
        assert!((e2 - w.energy).abs() <= 1e-12 * w.energy.abs());
    }

    #[test]
    fn flic_form_scaling_and_positivity() {
        let spec = PotentialSpec::PowerLaw { a: 2.0, b: 0.5, d: 1 };
        // W = x^2/2 - |x|^b/b differs from the pure power by a term that
        // vanishes on mean-zero, center-free measures; use the pure kernel too
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 48;
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
        let mu = GridMeasure::new(vec![0.0], 1.0 / n as f64, vec![n], v).unwrap();
        let f1 = flic_form(&spec, &mu, (1.0, 50.0)).unwrap();
        let f2 = flic_form(&spec, &mu.scaled(2.0), (1.0, 50.0)).unwrap();
        assert!((f2.band_integral - 4.0 * f1.band_integral).abs() <= 1e-12 * f2.band_integral);
        let zero = GridMeasure::new(vec![0.0], 0.1, vec![4], vec![0.0; 4]).unwrap();
        let z = flic_form(&spec, &zero, (1.0, 5.0)).unwrap();
        assert_eq!(z.band_integral, 0.0);
        assert!(z.ratio.is_none());
    }
}
