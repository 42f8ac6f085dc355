//! Particle ensembles, grid measures and Cantor iterates.

use crate::cantor::MAX_LEVEL;
use crate::error::{param, Error, Result};
use num::Complex;
use serde::{Deserialize, Serialize};

/// N weighted points in R^d, coordinates stored flat (point-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return param("dimension must be positive");
        }
        if coords.len() != dim * weights.len() {
            return param(format!(
                "{} coordinates do not match {} weights in dimension {dim}",
                coords.len(),
                weights.len()
            ));
        }
        if coords.iter().chain(&weights).any(|v| !v.is_finite()) {
            return param("non-finite coordinate or weight");
        }
        Ok(ParticleEnsemble { dim, coords, weights })
    }

    /// Equal weights 1/N.
    pub fn uniform(dim: usize, coords: Vec<f64>) -> Result<Self> {
        let n = coords.len() / dim.max(1);
        Self::new(dim, coords, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(1, |p| p.len());
        if points.iter().any(|p| p.len() != dim) {
            return param("ragged point list");
        }
        Self::uniform(dim, points.iter().flatten().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn center_of_mass(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        let m = self.total_mass();
        for i in 0..self.len() {
            for (k, x) in self.point(i).iter().enumerate() {
                c[k] += self.weights[i] * x;
            }
        }
        c.iter_mut().for_each(|v| *v /= m);
        c
    }

    pub fn translated(&self, v: &[f64]) -> Self {
        let mut out = self.clone();
        for (i, x) in out.coords.iter_mut().enumerate() {
            *x += v[i % self.dim];
        }
        out
    }

    /// Axis-aligned bounding box (min, max).
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.len() {
            for (k, &x) in self.point(i).iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        (lo, hi)
    }
}

/// Signed measure on a regular grid; values are cell masses, cells indexed
/// row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub origin: Vec<f64>,
    pub h: f64,
    pub extents: Vec<usize>,
    pub values: Vec<f64>,
}

const GRID_MAGIC: &[u8; 8] = b"AGGGRID1";

impl GridMeasure {
    pub fn new(origin: Vec<f64>, h: f64, extents: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if !(h > 0.0) {
            return param(format!("cell size must be positive, got {h}"));
        }
        if origin.len() != extents.len() || origin.is_empty() {
            return param("origin and extents disagree in dimension");
        }
        let n: usize = extents.iter().product();
        if n != values.len() {
            return param(format!("{} values for {n} cells", values.len()));
        }
        Ok(GridMeasure { origin, h, extents, values })
    }

    pub fn zeros(origin: Vec<f64>, h: f64, extents: Vec<usize>) -> Result<Self> {
        let n = extents.iter().product();
        Self::new(origin, h, extents, vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = lin % self.extents[k];
            lin /= self.extents[k];
        }
        idx
    }

    pub fn center(&self, lin: usize) -> Vec<f64> {
        self.multi_index(lin)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + (i as f64 + 0.5) * self.h)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v *= s);
        g
    }

    /// Cells of nonzero mass as a weighted point cloud at cell centers.
    pub fn to_particles(&self) -> ParticleEnsemble {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                coords.extend(self.center(i));
                weights.push(v);
            }
        }
        ParticleEnsemble { dim: self.dim(), coords, weights }
    }

    /// Little-endian binary: magic, u32 d, d x f64 origin, f64 h,
    /// d x u64 extents, then the f64 cell values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 + 16 * self.dim() + 8 + 8 * self.len());
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for o in &self.origin {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.h.to_le_bytes());
        for &e in &self.extents {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = || Error::Parameter("malformed grid binary".into());
        if b.len() < 12 || &b[..8] != GRID_MAGIC {
            return Err(bad());
        }
        let mut pos = 8;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = b.get(pos..pos + n).ok_or_else(bad)?;
            pos += n;
            Ok(s)
        };
        let d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let f = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
        let mut origin = Vec::with_capacity(d);
        for _ in 0..d {
            origin.push(f(take(8)?));
        }
        let h = f(take(8)?);
        let mut extents = Vec::with_capacity(d);
        for _ in 0..d {
            extents.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
        }
        let n: usize = extents.iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f(take(8)?));
        }
        Self::new(origin, h, extents, values)
    }
}

/// rho_k: uniform density (M/2)^k on 2^k intervals of length M^{-k}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorIterate {
    pub m: f64,
    pub k: usize,
    pub intervals: Vec<(f64, f64)>,
    pub height: f64,
}

/// Largest level materialized as an explicit interval list.
pub const MAX_MATERIALIZED_LEVEL: usize = 24;

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for t in terms {
        let u = s + t;
        if s.abs() >= t.abs() {
            c += (s - u) + t;
        } else {
            c += (t - u) + s;
        }
        s = u;
    }
    s + c
}

pub fn cantor_iterate(m: f64, k: usize) -> Result<CantorIterate> {
    if !(m.is_finite() && m > 3.0) {
        return param(format!("M must exceed 3, got {m}"));
    }
    if k > MAX_LEVEL {
        return param(format!("level {k} above cap {MAX_LEVEL}"));
    }
    if k > MAX_MATERIALIZED_LEVEL {
        return Err(Error::Overflow { count: 1usize << k.min(60), bound: 1 << MAX_MATERIALIZED_LEVEL });
    }
    let pows: Vec<f64> = (0..=k).map(|j| m.powi(-(j as i32))).collect();
    let len = pows[k];
    let n = 1usize << k;
    // left endpoint of I_{k,l} = sum over set bits (level i from the top) of (M-1) M^{-i}
    let intervals = (0..n)
        .map(|l| {
            let left = compensated_sum(
                (1..=k)
                    .rev()
                    .filter(|&i| l >> (k - i) & 1 == 1)
                    .map(|i| (m - 1.0) * pows[i]),
            );
            (left, left + len)
        })
        .collect();
    Ok(CantorIterate { m, k, intervals, height: (m / 2.0).powi(k as i32) })
}

impl CantorIterate {
    /// M^{-k}, the common interval length.
    pub fn interval_len(&self) -> f64 {
        self.m.powi(-(self.k as i32))
    }

    pub fn total_mass(&self) -> f64 {
        self.intervals.len() as f64 * self.interval_len() * self.height
    }

    pub fn contains(&self, x: f64) -> bool {
        let i = self.intervals.partition_point(|(a, _)| *a <= x);
        i > 0 && x <= self.intervals[i - 1].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceClass {
    Same,
    Level(usize),
}

/// Which gap class separates I_{k,l1} and I_{k,l2}.
pub fn distance_class(k: usize, l1: usize, l2: usize) -> Result<DistanceClass> {
    let n = 1usize << k;
    if l1 >= n || l2 >= n {
        return param(format!("indices must be below 2^{k}"));
    }
    if l1 == l2 {
        return Ok(DistanceClass::Same);
    }
    let top = usize::BITS as usize - 1 - (l1 ^ l2).leading_zeros() as usize;
    Ok(DistanceClass::Level(k - top))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Particles(ParticleEnsemble),
    Grid(GridMeasure),
    Cantor(CantorIterate),
}

impl Measure {
    pub fn dim(&self) -> usize {
        match self {
            Measure::Particles(p) => p.dim,
            Measure::Grid(g) => g.dim(),
            Measure::Cantor(_) => 1,
        }
    }
}

/// sum_j w_j exp(-i x_j . xi)
pub fn mu_hat_particles(p: &ParticleEnsemble, xi: &[f64]) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for i in 0..p.len() {
        let ph: f64 = p.point(i).iter().zip(xi).map(|(x, k)| x * k).sum();
        acc += p.weights[i] * Complex::new(ph.cos(), -ph.sin());
    }
    acc
}

/// Midpoint rule over the cells.
pub fn mu_hat_grid(g: &GridMeasure, xi: &[f64]) -> Complex<f64> {
    let d = g.dim();
    // separable phases: exp(-i (o_k + (i_k + 1/2) h) xi_k) per axis
    let axis: Vec<Vec<Complex<f64>>> = (0..d)
        .map(|k| {
            (0..g.extents[k])
                .map(|i| {
                    let ph = (g.origin[k] + (i as f64 + 0.5) * g.h) * xi[k];
                    Complex::new(ph.cos(), -ph.sin())
                })
                .collect()
        })
        .collect();
    let mut acc = Complex::new(0.0, 0.0);
    for (lin, &v) in g.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let idx = g.multi_index(lin);
        let mut ph = Complex::new(1.0, 0.0);
        for k in 0..d {
            ph *= axis[k][idx[k]];
        }
        acc += v * ph;
    }
    acc
}

pub fn mu_hat(m: &Measure, xi: &[f64]) -> Result<Complex<f64>> {
    if xi.len() != m.dim() {
        return Err(Error::Dimension { expected: m.dim(), got: xi.len() });
    }
    Ok(match m {
        Measure::Particles(p) => mu_hat_particles(p, xi),
        Measure::Grid(g) => mu_hat_grid(g, xi),
        Measure::Cantor(c) => {
            // exact transform of each uniform interval
            let k = xi[0];
            let mut acc = Complex::new(0.0, 0.0);
            for &(a, b) in &c.intervals {
                acc += if k == 0.0 {
                    Complex::new(c.height * (b - a), 0.0)
                } else {
                    let ea = Complex::new((k * a).cos(), -(k * a).sin());
                    let eb = Complex::new((k * b).cos(), -(k * b).sin());
                    c.height * (ea - eb) / Complex::new(0.0, k)
                };
            }
            acc
        }
    })
}
