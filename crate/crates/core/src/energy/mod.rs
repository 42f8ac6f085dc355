//! Interaction energies, generated potentials V = W * rho and the
//! Euler-Lagrange residuals of candidate minimizers.

mod appendix;
mod explicit;

pub use appendix::{appendix_identity_check, AppendixCheck};
pub use explicit::{explicit_minimizer, ExplicitMinimizer};

use crate::cantor::{CantorLevel, Rational, Scalar};
use crate::error::{Error, Result};
use crate::lattice::{convolve_direct, PaddedSpectrum};
use crate::measure::{CantorIterate, GridMeasure, Measure, ParticleEnsemble};
use crate::potential::{PotentialSpec, RadialKernel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Grids with more cells than this go through the FFT path.
const FFT_THRESHOLD: usize = 4096;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// (1/2) sum_{i != j} w_i w_j W(|x_i - x_j|)
pub fn particle_energy<K: RadialKernel + ?Sized>(kernel: &K, p: &ParticleEnsemble) -> Result<f64> {
    let n = p.len();
    let rows: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = p.point(i);
            let mut s = 0.0;
            for j in (i + 1)..n {
                let r = dist(xi, p.point(j));
                let w = if r == 0.0 {
                    kernel.at_zero().ok_or_else(|| {
                        Error::Singularity(format!("particles {i} and {j} coincide"))
                    })?
                } else {
                    kernel.value(r)
                };
                s += p.weights[j] * w;
            }
            Ok(p.weights[i] * s)
        })
        .collect();
    let mut e = 0.0;
    for r in rows {
        e += r?;
    }
    Ok(e)
}

fn offset_radius(o: &[i64], h: f64) -> f64 {
    h * (o.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt()
}

/// V at the cell centers: midpoint sum with the cell-averaged kernel on the
/// diagonal.
pub fn grid_potential<K: RadialKernel + ?Sized>(kernel: &K, g: &GridMeasure) -> Result<Vec<f64>> {
    let d = g.dim();
    let diag = if g.values.iter().any(|&v| v != 0.0) {
        kernel.cell_average(g.h, d)?
    } else {
        0.0
    };
    let h = g.h;
    let kern = |o: &[i64]| {
        if o.iter().all(|&v| v == 0) {
            diag
        } else {
            kernel.value(offset_radius(o, h))
        }
    };
    Ok(if g.len() > FFT_THRESHOLD {
        PaddedSpectrum::new(&g.values, &g.extents).convolve(kern)
    } else {
        convolve_direct(&g.values, &g.extents, kern)
    })
}

/// grad V at the cell centers, one vector per axis; the self cell
/// contributes nothing by symmetry.
pub fn grid_gradient<K: RadialKernel + ?Sized>(kernel: &K, g: &GridMeasure) -> Vec<Vec<f64>> {
    let d = g.dim();
    let h = g.h;
    let big = g.len() > FFT_THRESHOLD;
    let spec = if big { Some(PaddedSpectrum::new(&g.values, &g.extents)) } else { None };
    (0..d)
        .map(|a| {
            let kern = |o: &[i64]| {
                if o.iter().all(|&v| v == 0) {
                    return 0.0;
                }
                let r = offset_radius(o, h);
                kernel.d1(r) * (h * o[a] as f64) / r
            };
            match &spec {
                Some(s) => s.convolve(kern),
                None => convolve_direct(&g.values, &g.extents, kern),
            }
        })
        .collect()
}

/// Midpoint double sum with cell-averaged diagonal.
pub fn grid_energy<K: RadialKernel + ?Sized>(kernel: &K, g: &GridMeasure) -> Result<f64> {
    let v = grid_potential(kernel, g)?;
    Ok(0.5 * g.values.iter().zip(&v).map(|(m, v)| m * v).sum::<f64>())
}

/// E[rho + mu] - E[rho] = sum V_rho mu + E[mu] for a perturbation on the
/// grid of rho, given V_rho from grid_potential.
pub fn perturbation_gap<K: RadialKernel + ?Sized>(kernel: &K, v_base: &[f64], mu: &GridMeasure) -> Result<f64> {
    if v_base.len() != mu.len() {
        return Err(Error::Dimension { expected: v_base.len(), got: mu.len() });
    }
    let linear: f64 = v_base.iter().zip(&mu.values).map(|(v, m)| v * m).sum();
    Ok(linear + grid_energy(kernel, mu)?)
}

/// Energy of a particle or grid measure.
pub fn energy<K: RadialKernel + ?Sized>(kernel: &K, m: &Measure) -> Result<f64> {
    match m {
        Measure::Particles(p) => particle_energy(kernel, p),
        Measure::Grid(g) => grid_energy(kernel, g),
        Measure::Cantor(_) => Err(Error::Unsupported(
            "Cantor iterates are paired with the Cantor kernel through energy_spec".into(),
        )),
    }
}

fn cantor_level_for(spec: &PotentialSpec, c: &CantorIterate) -> Result<Option<CantorLevel>> {
    if let PotentialSpec::CantorPotential { m_ratio, alpha, cantor_level } = *spec {
        if m_ratio != c.m || cantor_level != c.k {
            return Err(Error::Parameter(format!(
                "kernel (M={m_ratio}, k={cantor_level}) and iterate (M={}, k={}) disagree",
                c.m, c.k
            )));
        }
        return Ok(Some(CantorLevel::new(m_ratio, alpha, cantor_level)?));
    }
    Ok(None)
}

/// Energy from a spec; the Cantor kernel against its own iterate is exact.
pub fn energy_spec(spec: &PotentialSpec, m: &Measure) -> Result<f64> {
    if let Measure::Cantor(c) = m {
        return match cantor_level_for(spec, c)? {
            Some(lvl) => Ok(lvl.energy()?.to_f64_lossy()),
            None => energy(&spec.kernel()?, m),
        };
    }
    energy(&spec.kernel()?, m)
}

/// Contribution of a weighted point at offset z (x - y) to V, grad V or
/// Laplacian V. Coincident points contribute W(0+) (or the cell average when
/// given), zero gradient and no Laplacian term.
fn point_term<K: RadialKernel + ?Sized>(
    kernel: &K,
    z: &[f64],
    order: u8,
    coincident: Option<f64>,
    out: &mut [f64],
    w: f64,
) -> Result<()> {
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = z.len();
    if r == 0.0 {
        if order == 0 {
            let v = coincident
                .or_else(|| kernel.at_zero())
                .ok_or_else(|| Error::Singularity("field point on an atom of a singular kernel".into()))?;
            out[0] += w * v;
        }
        return Ok(());
    }
    match order {
        0 => out[0] += w * kernel.value(r),
        1 => {
            let s = w * kernel.d1(r) / r;
            for k in 0..d {
                out[k] += s * z[k];
            }
        }
        _ => out[0] += w * (kernel.d2(r) + (d as f64 - 1.0) * kernel.d1(r) / r),
    }
    Ok(())
}

/// V (order 0), grad V (order 1) or Laplacian V (order 2) at the points.
pub fn field<K: RadialKernel + ?Sized>(
    kernel: &K,
    m: &Measure,
    points: &[Vec<f64>],
    order: u8,
) -> Result<Vec<Vec<f64>>> {
    let d = m.dim();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension { expected: d, got: p.len() });
    }
    let (cloud, coincident) = match m {
        Measure::Particles(p) => (p.clone(), None),
        Measure::Grid(g) => {
            let avg = kernel.cell_average(g.h, d)?;
            (g.to_particles(), Some((avg, g.h)))
        }
        Measure::Cantor(_) => {
            return Err(Error::Unsupported("use field_spec for Cantor iterates".into()))
        }
    };
    let width = if order == 1 { d } else { 1 };
    points
        .par_iter()
        .map(|x| {
            let mut out = vec![0.0; width];
            let mut z = vec![0.0; d];
            for j in 0..cloud.len() {
                let y = cloud.point(j);
                for k in 0..d {
                    z[k] = x[k] - y[k];
                }
                // a point inside a grid cell at its center takes the cell average
                let co = match coincident {
                    Some((avg, h)) if z.iter().all(|v| v.abs() < 1e-9 * h) => {
                        z.iter_mut().for_each(|v| *v = 0.0);
                        Some(avg)
                    }
                    _ => None,
                };
                point_term(kernel, &z, order, co, &mut out, cloud.weights[j])?;
            }
            Ok(out)
        })
        .collect()
}

/// field with the exact path for the Cantor kernel against its iterate.
pub fn field_spec(spec: &PotentialSpec, m: &Measure, points: &[Vec<f64>], order: u8) -> Result<Vec<Vec<f64>>> {
    if let Measure::Cantor(c) = m {
        if let Some(lvl) = cantor_level_for(spec, c)? {
            return points
                .iter()
                .map(|p| {
                    if p.len() != 1 {
                        return Err(Error::Dimension { expected: 1, got: p.len() });
                    }
                    let x = Rational::from_f64_exact(p[0]);
                    let v = match order {
                        0 => lvl.potential_at(&x),
                        1 => lvl.force_at(&x),
                        _ => crate::cantor::conv_at(&lvl.kernel.w1, &lvl.rho, &x),
                    };
                    Ok(vec![v.to_f64_lossy()])
                })
                .collect();
        }
        return Err(Error::Unsupported("Cantor iterates need the matching Cantor kernel".into()));
    }
    field(&spec.kernel()?, m, points, order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElResidual {
    /// max |grad V| over support samples
    pub steady_max: f64,
    /// max(0, 2E - min V over off-support probes)
    pub d2_violation: f64,
    /// max(0, 2E - min V over off-support probes within eps0 of the support)
    pub local_violation: f64,
    pub plateau: f64,
    pub min_probe_value: f64,
    pub probes: usize,
    pub support_samples: usize,
    pub tube: f64,
    pub eps0: f64,
}

/// Probe points: centers of a 64^d partition of the bounding box inflated by
/// 25 percent.
fn probe_grid(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let d = lo.len();
    let n = 64usize;
    let mut a = Vec::with_capacity(d);
    let mut step = Vec::with_capacity(d);
    for k in 0..d {
        let ext = (hi[k] - lo[k]).max(1e-3);
        let pad = 0.125 * ext;
        a.push(lo[k] - pad);
        step.push((ext + 2.0 * pad) / n as f64);
    }
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut lin| {
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = a[k] + ((lin % n) as f64 + 0.5) * step[k];
                lin /= n;
            }
            p
        })
        .collect()
}

fn nearest_distances(probes: &[Vec<f64>], support: &[Vec<f64>]) -> Vec<f64> {
    probes
        .par_iter()
        .map(|p| support.iter().map(|s| dist(p, s)).fold(f64::INFINITY, f64::min))
        .collect()
}

fn median_nn(support: &[Vec<f64>]) -> f64 {
    if support.len() < 2 {
        return 1e-3;
    }
    let mut nn: Vec<f64> = (0..support.len())
        .into_par_iter()
        .map(|i| {
            support
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| dist(&support[i], s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nn[nn.len() / 2]
}

fn summarize(
    steady_max: f64,
    plateau: f64,
    probe_vals: &[f64],
    probe_dist: &[f64],
    tube: f64,
    eps0: f64,
    support_samples: usize,
) -> ElResidual {
    let mut min_all = f64::INFINITY;
    let mut min_local = f64::INFINITY;
    let mut used = 0;
    for (v, dd) in probe_vals.iter().zip(probe_dist) {
        if *dd <= tube {
            continue;
        }
        used += 1;
        min_all = min_all.min(*v);
        if *dd <= eps0 {
            min_local = min_local.min(*v);
        }
    }
    ElResidual {
        steady_max,
        d2_violation: (plateau - min_all).max(0.0),
        local_violation: if min_local.is_finite() { (plateau - min_local).max(0.0) } else { 0.0 },
        plateau,
        min_probe_value: min_all,
        probes: used,
        support_samples,
        tube,
        eps0,
    }
}

/// Steady-state and d2 residuals of a compactly supported probability measure.
pub fn el_residual(spec: &PotentialSpec, m: &Measure, eps0: f64) -> Result<ElResidual> {
    if let Measure::Cantor(c) = m {
        let lvl = cantor_level_for(spec, c)?
            .ok_or_else(|| Error::Unsupported("Cantor iterates need the matching Cantor kernel".into()))?;
        let ver = crate::cantor::verify_steady(c.m, lvl.alpha, c.k)?;
        let plateau = 2.0 * lvl.energy()?.to_f64_lossy();
        let probes = probe_grid(&[0.0], &[1.0]);
        let h = c.m.powi(-(c.k as i32));
        let support: Vec<Vec<f64>> = c.intervals.iter().flat_map(|&(a, b)| [vec![a], vec![b]]).collect();
        // distance to the interval set, not just its endpoints
        let dists: Vec<f64> = probes
            .iter()
            .map(|p| if c.contains(p[0]) { 0.0 } else { support.iter().map(|s| (s[0] - p[0]).abs()).fold(f64::INFINITY, f64::min) })
            .collect();
        let vals: Vec<f64> = probes
            .iter()
            .map(|p| lvl.potential_at(&Rational::from_f64_exact(p[0])).to_f64_lossy())
            .collect();
        return Ok(summarize(ver.steady_residual, plateau, &vals, &dists, 2.0 * h, eps0, c.intervals.len()));
    }
    let kernel = spec.kernel()?;
    match m {
        Measure::Particles(p) => {
            let support: Vec<Vec<f64>> = (0..p.len()).map(|i| p.point(i).to_vec()).collect();
            let grads = field(&kernel, m, &support, 1)?;
            let steady = grads
                .iter()
                .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let plateau = 2.0 * particle_energy(&kernel, p)?;
            let (lo, hi) = p.bbox();
            let probes = probe_grid(&lo, &hi);
            let dists = nearest_distances(&probes, &support);
            let tube = 2.0 * median_nn(&support);
            let keep: Vec<usize> = (0..probes.len()).filter(|&i| dists[i] > tube).collect();
            let kept: Vec<Vec<f64>> = keep.iter().map(|&i| probes[i].clone()).collect();
            let vals: Vec<f64> = field(&kernel, m, &kept, 0)?.into_iter().map(|v| v[0]).collect();
            let kd: Vec<f64> = keep.iter().map(|&i| dists[i]).collect();
            Ok(summarize(steady, plateau, &vals, &kd, tube, eps0, support.len()))
        }
        Measure::Grid(g) => grid_el_residual(&kernel, g, eps0),
        Measure::Cantor(_) => unreachable!(),
    }
}

fn grid_el_residual<K: RadialKernel + ?Sized>(kernel: &K, g: &GridMeasure, eps0: f64) -> Result<ElResidual> {
    let d = g.dim();
    let grads = grid_gradient(kernel, g);
    let support_idx: Vec<usize> = (0..g.len()).filter(|&i| g.values[i] > 0.0).collect();
    let steady = support_idx
        .iter()
        .map(|&i| grads.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let plateau = 2.0 * grid_energy(kernel, g)?;
    // V on a zero-padded grid covering the inflated box
    let pad: Vec<usize> = g.extents.iter().map(|&n| (n as f64 * 0.125).ceil() as usize).collect();
    let ext: Vec<usize> = g.extents.iter().zip(&pad).map(|(n, p)| n + 2 * p).collect();
    let origin: Vec<f64> = g.origin.iter().zip(&pad).map(|(o, &p)| o - p as f64 * g.h).collect();
    let mut big = GridMeasure::zeros(origin, g.h, ext.clone())?;
    for i in 0..g.len() {
        let idx = g.multi_index(i);
        let mut lin = 0;
        for k in 0..d {
            lin = lin * ext[k] + idx[k] + pad[k];
        }
        big.values[lin] = g.values[i];
    }
    let v = grid_potential(kernel, &big)?;
    // 64 evenly spread cells per axis
    let per: Vec<Vec<usize>> = ext
        .iter()
        .map(|&n| {
            let mut s: Vec<usize> = (0..64).map(|j| ((j as f64 + 0.5) * n as f64 / 64.0) as usize).collect();
            s.dedup();
            s
        })
        .collect();
    let mut probe_lin = vec![0usize];
    for k in 0..d {
        let mut next = Vec::new();
        for &l in &probe_lin {
            for &i in &per[k] {
                next.push(l * ext[k] + i);
            }
        }
        probe_lin = next;
    }
    let support: Vec<Vec<f64>> = support_idx.iter().map(|&i| g.center(i)).collect();
    let probes: Vec<Vec<f64>> = probe_lin.iter().map(|&l| big.center(l)).collect();
    let dists = nearest_distances(&probes, &support);
    let vals: Vec<f64> = probe_lin.iter().map(|&l| v[l]).collect();
    Ok(summarize(steady, plateau, &vals, &dists, 2.0 * g.h, eps0, support.len()))
}
