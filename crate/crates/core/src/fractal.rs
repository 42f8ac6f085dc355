//! Diagnostics on computed states: box counting, single-linkage layers,
//! isolated points, angular asymmetry and histogram superlevel sets.

use crate::error::{param, Error, Result};
use crate::measure::ParticleEnsemble;
use num::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Relative slack when assigning coordinates to boxes, so points on a grid
/// line land in the box they start.
const ANCHOR_TOL: f64 = 1e-9;

/// Slack in box units, widened to cover rounding in coordinates of size `mag`.
fn slack(mag: f64, eps: f64) -> f64 {
    ANCHOR_TOL + 16.0 * f64::EPSILON * mag / eps
}

const MAX_HIST_CELLS: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    pub r_squared: f64,
    /// (smallest, largest) scale used by the fit
    pub window: (f64, f64),
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Least squares slope and R^2 of y against x.
fn fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

fn check_scales(scales: &[f64]) -> Result<()> {
    if scales.len() < 2 || scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return param("need at least two positive scales");
    }
    let lo = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 16.0 {
        return param(format!("scales span a factor {:.3}, need at least 16", hi / lo));
    }
    Ok(())
}

fn estimate(scales: Vec<f64>, counts: Vec<usize>) -> DimensionEstimate {
    let x: Vec<f64> = scales.iter().map(|s| -s.ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, r_squared) = fit(&x, &y);
    let lo = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().cloned().fold(0.0, f64::max);
    DimensionEstimate { scales, counts, slope, r_squared, window: (lo, hi) }
}

/// Default scales span 2^{-k}, k = 1.. down to about twice the mean spacing.
pub fn default_scales(points: &ParticleEnsemble) -> Vec<f64> {
    let (lo, hi) = points.bbox();
    let span = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let per_axis = (points.len() as f64).powf(1.0 / points.dim as f64);
    let kmax = ((per_axis / 2.0).log2().floor() as i32).max(5);
    (1..=kmax).map(|k| span * 0.5f64.powi(k)).collect()
}

/// Occupied boxes of side eps on the grid anchored at the bounding box.
pub fn box_count(points: &ParticleEnsemble, eps: f64) -> usize {
    let (lo, hi) = points.bbox();
    let d = points.dim;
    let mag = lo.iter().chain(&hi).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = slack(mag, eps);
    let mut seen = HashSet::new();
    for i in 0..points.len() {
        let key: Vec<i64> =
            (0..d).map(|k| ((points.point(i)[k] - lo[k]) / eps + tol).floor() as i64).collect();
        seen.insert(key);
    }
    seen.len()
}

pub fn box_dimension(points: &ParticleEnsemble, scales: Option<&[f64]>) -> Result<DimensionEstimate> {
    if points.is_empty() {
        return Err(Error::Degenerate("no points".into()));
    }
    let (lo, hi) = points.bbox();
    let span = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    if span == 0.0 {
        // a single location has dimension 0; no regression is attempted
        return Ok(DimensionEstimate {
            scales: vec![],
            counts: vec![],
            slope: 0.0,
            r_squared: 1.0,
            window: (0.0, 0.0),
        });
    }
    let scales = match scales {
        Some(s) => s.to_vec(),
        None => default_scales(points),
    };
    check_scales(&scales)?;
    let counts = scales.par_iter().map(|&e| box_count(points, e)).collect();
    Ok(estimate(scales, counts))
}

/// Box counting on a union of closed intervals, anchored at the leftmost
/// endpoint; an interval occupies the boxes its interior meets.
pub fn box_dimension_intervals(intervals: &[(f64, f64)], scales: &[f64]) -> Result<DimensionEstimate> {
    if intervals.is_empty() {
        return Err(Error::Degenerate("no intervals".into()));
    }
    check_scales(scales)?;
    let lo = intervals.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mag = intervals.iter().fold(0.0f64, |m, p| m.max(p.0.abs()).max(p.1.abs()));
    let counts = scales
        .par_iter()
        .map(|&eps| {
            let tol = slack(mag, eps);
            let mut ranges: Vec<(i64, i64)> = intervals
                .iter()
                .map(|&(a, b)| {
                    let first = ((a - lo) / eps + tol).floor() as i64;
                    let last = (((b - lo) / eps - tol).ceil() as i64 - 1).max(first);
                    (first, last)
                })
                .collect();
            ranges.sort_unstable();
            let mut total = 0i64;
            let mut cur: Option<(i64, i64)> = None;
            for (a, b) in ranges {
                cur = match cur {
                    Some((s, e)) if a <= e + 1 => Some((s, e.max(b))),
                    Some((s, e)) => {
                        total += e - s + 1;
                        Some((a, b))
                    }
                    None => Some((a, b)),
                };
            }
            if let Some((s, e)) = cur {
                total += e - s + 1;
            }
            total as usize
        })
        .collect();
    Ok(estimate(scales.to_vec(), counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub clusters: usize,
    /// linkage distance at which these clusters merge into the next
    /// coarser layer
    pub scale: f64,
    /// linkage distances (lo, hi) over which the count is stable
    pub band: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    /// ordered by decreasing scale
    pub layers: Vec<Layer>,
    /// scale of layer l+1 over scale of layer l
    pub ratios: Vec<f64>,
    /// cluster counts at base_scale * ratio_hint^j
    pub sweep: Vec<(f64, usize)>,
    pub min_log_width: f64,
}

impl HierarchyReport {
    /// Most consecutive layers whose successive ratios all lie in [lo, hi].
    pub fn longest_chain(&self, lo: f64, hi: f64) -> usize {
        if self.layers.is_empty() {
            return 0;
        }
        let mut best = 1;
        let mut run = 1;
        for r in &self.ratios {
            if *r >= lo && *r <= hi {
                run += 1;
                best = best.max(run);
            } else {
                run = 1;
            }
        }
        best
    }
}

/// Minimum spanning tree edge lengths (Prim, O(N^2)).
pub fn mst_edges(points: &ParticleEnsemble) -> Vec<f64> {
    let n = points.len();
    if n < 2 {
        return vec![];
    }
    let mut best = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut cur = 0;
    done[0] = true;
    for _ in 1..n {
        let p = points.point(cur);
        best.par_iter_mut().enumerate().for_each(|(j, b)| {
            if !done[j] {
                *b = b.min(dist(p, points.point(j)));
            }
        });
        let mut next = usize::MAX;
        let mut bd = f64::INFINITY;
        for j in 0..n {
            if !done[j] && (next == usize::MAX || best[j] < bd) {
                bd = best[j];
                next = j;
            }
        }
        done[next] = true;
        edges.push(bd);
        cur = next;
    }
    edges
}

/// Single-linkage layers: a layer is a cluster count that stays fixed while
/// the linkage distance grows by at least a factor ratio_hint^{-1/2}.
pub fn hierarchy_layers(points: &ParticleEnsemble, base_scale: f64, ratio_hint: f64) -> Result<HierarchyReport> {
    if !(ratio_hint > 0.0 && ratio_hint < 1.0) {
        return param(format!("ratio hint must lie in (0, 1), got {ratio_hint}"));
    }
    if !(base_scale > 0.0) {
        return param("base scale must be positive");
    }
    let min_log_width = 0.5 * (1.0 / ratio_hint).ln();
    let n = points.len();
    let mut report = HierarchyReport { layers: vec![], ratios: vec![], sweep: vec![], min_log_width };
    if n < 4 {
        return Ok(report);
    }
    let mut e = mst_edges(points);
    e.sort_by(|a, b| b.total_cmp(a));
    // with e sorted descending, linking at distance s leaves
    // 1 + #{e > s} clusters: c clusters for s in [e_c, e_{c-1})
    let count_at = |s: f64| 1 + e.partition_point(|&v| v > s);
    let mut s = base_scale;
    while s > e[n - 2] * ratio_hint && report.sweep.len() < 200 {
        report.sweep.push((s, count_at(s)));
        s *= ratio_hint;
    }
    for c in 2..=n {
        let upper = e[c - 2];
        let lower = if c == n { 0.0 } else { e[c - 1] };
        if upper <= 0.0 {
            continue;
        }
        let wide = lower == 0.0 || (upper / lower).ln() >= min_log_width;
        if wide {
            report.layers.push(Layer { clusters: c, scale: upper, band: (lower, upper) });
        }
    }
    report.ratios = report.layers.windows(2).map(|l| l[1].scale / l[0].scale).collect();
    Ok(report)
}

/// Nearest-neighbor distance of every point (O(N^2), parallel over points).
pub fn nearest_neighbor(points: &ParticleEnsemble) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points.point(i);
            (0..n).filter(|&j| j != i).map(|j| dist(p, points.point(j))).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

pub fn isolated_points(points: &ParticleEnsemble, gap_factor: f64) -> Result<Vec<usize>> {
    if points.len() < 2 {
        return param("isolated_points needs at least two points");
    }
    let nn = nearest_neighbor(points);
    let cut = gap_factor * median(&nn);
    Ok((0..nn.len()).filter(|&i| nn[i] > cut).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetrySpectrum {
    /// outer radius of each bin
    pub bin_edges: Vec<f64>,
    pub bin_mass: Vec<f64>,
    /// magnitudes[b][m - 1] = |sum_{i in b} w_i e^{-i m theta_i}| / mass_b
    pub magnitudes: Vec<Vec<f64>>,
    pub index: f64,
}

pub fn asymmetry(points: &ParticleEnsemble, bins: usize, m_max: usize) -> Result<AsymmetrySpectrum> {
    if points.dim != 2 {
        return Err(Error::Dimension { expected: 2, got: points.dim });
    }
    if bins == 0 || m_max == 0 {
        return param("need at least one bin and one mode");
    }
    if points.is_empty() {
        return Err(Error::Degenerate("no points".into()));
    }
    let c = points.center_of_mass();
    let polar: Vec<(f64, f64, f64)> = (0..points.len())
        .map(|i| {
            let p = points.point(i);
            let (x, y) = (p[0] - c[0], p[1] - c[1]);
            (x.hypot(y), y.atan2(x), points.weights[i])
        })
        .collect();
    let r_max = polar.iter().map(|p| p.0).fold(0.0, f64::max);
    let bin_edges: Vec<f64> = (1..=bins).map(|b| r_max * b as f64 / bins as f64).collect();
    let mut sums = vec![vec![Complex::new(0.0, 0.0); m_max]; bins];
    let mut bin_mass = vec![0.0; bins];
    for &(r, th, w) in &polar {
        let b = if r_max == 0.0 { 0 } else { ((r / r_max * bins as f64) as usize).min(bins - 1) };
        bin_mass[b] += w;
        // the center carries no angle
        if r <= 1e-12 * r_max {
            continue;
        }
        for m in 1..=m_max {
            sums[b][m - 1] += w * Complex::from_polar(1.0, -(m as f64) * th);
        }
    }
    let magnitudes: Vec<Vec<f64>> = sums
        .iter()
        .zip(&bin_mass)
        .map(|(s, &mb)| s.iter().map(|z| if mb > 0.0 { z.norm() / mb } else { 0.0 }).collect())
        .collect();
    let total: f64 = bin_mass.iter().sum();
    let mut acc = 0.0;
    for (row, &mb) in magnitudes.iter().zip(&bin_mass) {
        acc += mb * row.iter().map(|v| v * v).sum::<f64>();
    }
    let index = (acc / (total * m_max as f64)).sqrt();
    Ok(AsymmetrySpectrum { bin_edges, bin_mass, magnitudes, index })
}

/// Histogram density (mass per unit volume) on a grid anchored at the
/// bounding box, one empty cell of margin on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub origin: Vec<f64>,
    pub h: f64,
    pub extents: Vec<usize>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(points: &ParticleEnsemble, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return param("cell size must be positive");
        }
        if points.is_empty() {
            return Err(Error::Degenerate("no points".into()));
        }
        let d = points.dim;
        let (lo, hi) = points.bbox();
        let origin: Vec<f64> = lo.iter().map(|v| v - h).collect();
        let extents: Vec<usize> =
            lo.iter().zip(&hi).map(|(a, b)| ((b - a) / h + ANCHOR_TOL).floor() as usize + 3).collect();
        let cells = extents.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        match cells {
            Some(c) if c <= MAX_HIST_CELLS => {}
            _ => return Err(Error::Resolution(format!("histogram at h = {h} needs more than {MAX_HIST_CELLS} cells"))),
        }
        let total: usize = extents.iter().product();
        let mut density = vec![0.0; total];
        let vol = h.powi(d as i32);
        for i in 0..points.len() {
            let mut lin = 0;
            for k in 0..d {
                let idx = ((points.point(i)[k] - origin[k]) / h + ANCHOR_TOL).floor() as usize;
                lin = lin * extents[k] + idx.min(extents[k] - 1);
            }
            density[lin] += points.weights[i] / vol;
        }
        Ok(Histogram { origin, h, extents, density })
    }

    pub fn peak(&self) -> f64 {
        self.density.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperlevelReport {
    pub h: f64,
    pub eps0: f64,
    pub delta: f64,
    /// cells at or above eps0
    pub cells_above: usize,
    pub peak_density: f64,
    /// some ball of radius delta centered at a cell center has every cell
    /// center inside it at density >= eps0
    pub contains_ball: bool,
}

pub fn superlevel_interior(hist: &Histogram, eps0: f64, delta: f64) -> Result<SuperlevelReport> {
    if !(delta > 0.0) {
        return param("ball radius must be positive");
    }
    if hist.h > delta / 4.0 * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!("cell size {} exceeds delta/4 = {}", hist.h, delta / 4.0)));
    }
    let d = hist.extents.len();
    let reach = (delta / hist.h).floor() as i64;
    let mut offsets: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..d {
        offsets = offsets
            .into_iter()
            .flat_map(|o| (-reach..=reach).map(move |v| [o.clone(), vec![v]].concat()))
            .collect();
    }
    offsets.retain(|o| {
        let r2: i64 = o.iter().map(|v| v * v).sum();
        (r2 as f64).sqrt() * hist.h <= delta
    });
    let ext = &hist.extents;
    let above: Vec<bool> = hist.density.iter().map(|&v| v >= eps0).collect();
    let cells_above = above.iter().filter(|&&b| b).count();
    let to_multi = |mut lin: usize| -> Vec<i64> {
        let mut m = vec![0i64; d];
        for k in (0..d).rev() {
            m[k] = (lin % ext[k]) as i64;
            lin /= ext[k];
        }
        m
    };
    let contains_ball = (0..hist.density.len()).into_par_iter().filter(|&c| above[c]).any(|c| {
        let m = to_multi(c);
        offsets.iter().all(|o| {
            let mut lin = 0usize;
            for k in 0..d {
                let v = m[k] + o[k];
                if v < 0 || v >= ext[k] as i64 {
                    return false;
                }
                lin = lin * ext[k] + v as usize;
            }
            above[lin]
        })
    });
    Ok(SuperlevelReport { h: hist.h, eps0, delta, cells_above, peak_density: hist.peak(), contains_ball })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::cantor_iterate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: &[[f64; 2]]) -> ParticleEnsemble {
        ParticleEnsemble::uniform(2, pts.iter().flatten().copied().collect()).unwrap()
    }

    fn random_cloud(seed: u64, n: usize) -> ParticleEnsemble {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParticleEnsemble::uniform(2, (0..2 * n).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    fn lattice(n: usize) -> ParticleEnsemble {
        let c: Vec<f64> =
            (0..n * n).flat_map(|i| [(i / n) as f64 / n as f64, (i % n) as f64 / n as f64]).collect();
        ParticleEnsemble::uniform(2, c).unwrap()
    }

    #[test]
    fn single_point_has_dimension_zero() {
        let p = cloud(&[[0.3, 0.4]]);
        assert_eq!(box_dimension(&p, None).unwrap().slope, 0.0);
    }

    #[test]
    fn lattice_is_two_dimensional() {
        let scales = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let e = box_dimension(&lattice(64), Some(&scales)).unwrap();
        assert!((e.slope - 2.0).abs() < 0.1, "{e:?}");
        assert_eq!(e.counts[4], 1024);
    }

    #[test]
    fn cantor_iterate_dimension() {
        let c = cantor_iterate(12.0, 8).unwrap();
        let iv: Vec<(f64, f64)> = c.intervals.iter().map(|&(a, b)| (a, b)).collect();
        let target = 2f64.ln() / 12f64.ln();
        let scales: Vec<f64> = (1..=7).map(|j| 12f64.powi(-j)).collect();
        let e = box_dimension_intervals(&iv, &scales).unwrap();
        assert!((e.slope - target).abs() < 1e-9, "{e:?}");
        let dyadic: Vec<f64> = (2..=24).map(|j| 0.5f64.powi(j)).collect();
        let e = box_dimension_intervals(&iv, &dyadic).unwrap();
        assert!((e.slope - target).abs() < 0.03, "{e:?}");
    }

    #[test]
    fn narrow_scale_range_rejected() {
        assert!(box_dimension(&lattice(8), Some(&[0.5, 0.25])).is_err());
    }

    #[test]
    fn two_tight_pairs_give_two_layers() {
        let p = cloud(&[[0.0, 0.0], [0.001, 0.0], [10.0, 0.0], [10.0, 0.0012]]);
        let h = hierarchy_layers(&p, 20.0, 0.15).unwrap();
        let counts: Vec<usize> = h.layers.iter().map(|l| l.clusters).collect();
        assert_eq!(counts, vec![2, 4]);
        assert_eq!(h.sweep[0], (20.0, 1));
    }

    #[test]
    fn three_level_cluster_tree() {
        let mut pts = vec![];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    pts.push([a as f64 + 0.1 * b as f64 + 0.01 * c as f64, 0.0]);
                }
            }
        }
        let h = hierarchy_layers(&cloud(&pts), 2.0, 0.1).unwrap();
        let counts: Vec<usize> = h.layers.iter().map(|l| l.clusters).collect();
        assert_eq!(counts, vec![2, 4, 8]);
        assert_eq!(h.longest_chain(0.05, 0.2), 3);
    }

    #[test]
    fn uniform_cloud_has_at_most_one_layer() {
        let h = hierarchy_layers(&random_cloud(5, 300), 1.0, 0.15).unwrap();
        assert!(h.layers.len() <= 1, "{:?}", h.layers);
    }

    #[test]
    fn isolated_examples() {
        let line: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 0.0]).collect();
        assert!(isolated_points(&cloud(&line), 1.5).unwrap().is_empty());
        let mut pts = line.clone();
        pts.push([29.0, 0.0]);
        assert_eq!(isolated_points(&cloud(&pts), 5.0).unwrap(), vec![20]);
    }

    #[test]
    fn ring_asymmetry_is_small() {
        let n = 500;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<f64> = (0..n)
            .flat_map(|_| {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                [t.cos(), t.sin()]
            })
            .collect();
        let s = asymmetry(&ParticleEnsemble::uniform(2, c).unwrap(), 4, 4).unwrap();
        assert!(s.index <= 3.0 / (n as f64).sqrt(), "{}", s.index);
    }

    #[test]
    fn antipodal_clusters_excite_mode_two() {
        let mut pts = vec![];
        for i in 0..20 {
            let e = 1e-3 * i as f64;
            pts.push([1.0 + e, e]);
            pts.push([-1.0 - e, -e]);
        }
        let s = asymmetry(&cloud(&pts), 1, 4).unwrap();
        let row = &s.magnitudes[0];
        assert!(row[1] > 0.99 && row[0] < 1e-12 && row[2] < 1e-12, "{row:?}");
        assert!(asymmetry(&ParticleEnsemble::uniform(1, vec![0.0, 1.0]).unwrap(), 2, 2).is_err());
    }

    #[test]
    fn filled_square_contains_ball() {
        let p = lattice(200);
        let hist = Histogram::new(&p, 0.25 / 4.0).unwrap();
        let eps0 = 0.5 * hist.peak();
        assert!(superlevel_interior(&hist, eps0, 0.25).unwrap().contains_ball);
        // empty region: a threshold above every cell
        assert!(!superlevel_interior(&hist, 2.0 * hist.peak(), 0.25).unwrap().contains_ball);
        assert!(matches!(superlevel_interior(&hist, eps0, 0.2), Err(Error::Resolution(_))));
    }

    #[test]
    fn sparse_dust_contains_no_ball() {
        let pts: Vec<[f64; 2]> = (0..25).map(|i| [(i / 5) as f64, (i % 5) as f64]).collect();
        let hist = Histogram::new(&cloud(&pts), 0.05).unwrap();
        let r = superlevel_interior(&hist, 0.5 * hist.peak(), 0.2).unwrap();
        assert!(!r.contains_ball);
        assert_eq!(r.cells_above, 25);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn box_count_monotone_under_inclusion(seed in 0u64..500, extra in 1usize..40) {
            let base = random_cloud(seed, 60);
            let more = random_cloud(seed + 1000, extra);
            let mut c = base.coords.clone();
            c.extend(&more.coords);
            // anchor both at the same corner
            c.extend([0.0, 0.0, 1.0, 1.0]);
            let mut b = base.coords.clone();
            b.extend([0.0, 0.0, 1.0, 1.0]);
            let small = ParticleEnsemble::uniform(2, b).unwrap();
            let big = ParticleEnsemble::uniform(2, c).unwrap();
            for k in 1..6 {
                let e = 0.5f64.powi(k);
                prop_assert!(box_count(&big, e) >= box_count(&small, e));
            }
        }

        #[test]
        fn asymmetry_rotation_invariant(seed in 0u64..500, angle in 0.0f64..6.3) {
            let p = random_cloud(seed, 50);
            let (s, c) = angle.sin_cos();
            let rot: Vec<f64> = (0..p.len())
                .flat_map(|i| {
                    let q = p.point(i);
                    [c * q[0] - s * q[1], s * q[0] + c * q[1]]
                })
                .collect();
            let a = asymmetry(&p, 3, 4).unwrap();
            let b = asymmetry(&ParticleEnsemble::uniform(2, rot).unwrap(), 3, 4).unwrap();
            prop_assert!((a.index - b.index).abs() < 1e-10);
        }

        #[test]
        fn hierarchy_invariant_under_relabel_and_shift(seed in 0u64..500, vx in -5.0f64..5.0) {
            let p = random_cloud(seed, 40);
            let shifted = p.translated(&[vx, 0.5]);
            let n = p.len();
            let rev: Vec<f64> = (0..n).rev().flat_map(|i| p.point(i).to_vec()).collect();
            let r = ParticleEnsemble::uniform(2, rev).unwrap();
            let a = hierarchy_layers(&p, 1.0, 0.2).unwrap();
            let b = hierarchy_layers(&shifted, 1.0, 0.2).unwrap();
            let c = hierarchy_layers(&r, 1.0, 0.2).unwrap();
            let counts = |h: &HierarchyReport| h.layers.iter().map(|l| l.clusters).collect::<Vec<_>>();
            prop_assert_eq!(counts(&a), counts(&b));
            prop_assert_eq!(counts(&a), counts(&c));
            for (x, y) in a.layers.iter().zip(&b.layers) {
                prop_assert!((x.scale / y.scale - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn isolated_points_scale_invariant(seed in 0u64..500, s in 0.01f64..100.0) {
            let mut p = random_cloud(seed, 30);
            p.coords.extend([5.0, 5.0]);
            p.weights.push(p.weights[0]);
            let q = ParticleEnsemble::new(2, p.coords.iter().map(|v| v * s).collect(), p.weights.clone()).unwrap();
            prop_assert_eq!(isolated_points(&p, 4.0).unwrap(), isolated_points(&q, 4.0).unwrap());
        }
    }
}
