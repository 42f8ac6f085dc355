use crate::output::Outputs;
use crate::svg;
use crate::Common;
use aggmin_core::cantor::{default_probes, profile, verify_margin, STEADY_TOL};
use aggmin_core::energy::el_residual;
use aggmin_core::flow::{energy_monitor, simulate as run_flow, Init, SimConfig};
use aggmin_core::fourier::{build_witness, scan_windows, WITNESS_CELLS};
use aggmin_core::fractal::{asymmetry, box_dimension, hierarchy_layers, isolated_points, superlevel_interior, Histogram};
use aggmin_core::measure::{cantor_iterate, MAX_MATERIALIZED_LEVEL};
use aggmin_core::{DiagnosticsReport, Error, Measure, ParticleEnsemble, PotentialSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_)
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::Dimension { .. }
            | Error::ProbeOnSupport(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let body = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&body).map_err(|e| CliError::Usage(format!("invalid JSON in {}: {e}", path.display())))
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn coord_header(d: usize) -> Vec<String> {
    (0..d).map(|k| format!("x{k}")).collect()
}

fn plot_points(p: &ParticleEnsemble) -> Vec<(f64, f64)> {
    (0..p.len())
        .map(|i| {
            let q = p.point(i);
            (q[0], if p.dim > 1 { q[1] } else { 0.0 })
        })
        .collect()
}

pub fn hier_reference_spec(k_trunc: usize) -> PotentialSpec {
    PotentialSpec::HierGauss { d: 2, alpha: 3.0, lambda: 0.15, c_w: 0.25, k_trunc, c2: 0.2 }
}

fn default_sim_config() -> SimConfig {
    SimConfig {
        spec: hier_reference_spec(7),
        n: 400,
        dt: 0.01,
        t_final: 50.0,
        init: Init::UniformBox { lo: vec![0.0], hi: vec![0.5] },
        seed: 1,
        snapshot_stride: 100,
        r_min: 1e-8,
        blowup_bound: 1e6,
    }
}

pub fn simulate(c: &Common, n: Option<usize>, t_final: Option<f64>) -> Result<(), CliError> {
    let mut cfg = match &c.config {
        Some(p) => read_json::<SimConfig>(p)?,
        None => default_sim_config(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    if let Some(t) = t_final {
        cfg.t_final = t;
    }
    cfg.validate()?;
    let tol = c.tolerance.unwrap_or(1e-6);
    let traj = run_flow(&cfg)?;
    let mon = energy_monitor(&traj);
    let d = traj.snapshots[0].dim;
    let mut out = Outputs::new(&c.out)?;

    let mut header = vec!["t".to_string(), "particle".to_string()];
    header.extend(coord_header(d));
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows = traj.times.iter().zip(&traj.snapshots).flat_map(|(t, s)| {
        (0..s.len()).map(move |i| {
            let mut r = vec![num(*t), i.to_string()];
            r.extend(s.point(i).iter().map(|&v| num(v)));
            r
        })
    });
    out.csv("trajectory.csv", &h, rows)?;
    out.csv(
        "energy.csv",
        &["t", "energy"],
        traj.times.iter().zip(&traj.energies).map(|(t, e)| vec![num(*t), num(*e)]),
    )?;
    out.csv(
        "steps.csv",
        &["step", "max_displacement"],
        traj.max_disp.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), num(*v)]),
    )?;
    let fin = traj.final_state();
    let mut header = coord_header(d);
    header.push("weight".into());
    let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    out.csv(
        "final.csv",
        &h,
        (0..fin.len()).map(|i| {
            let mut r: Vec<String> = fin.point(i).iter().map(|&v| num(v)).collect();
            r.push(num(fin.weights[i]));
            r
        }),
    )?;
    let t_end = *traj.times.last().unwrap();
    out.text("final.svg", &svg::scatter(&plot_points(fin), &format!("final state, t = {t_end}, N = {}", fin.len())))?;
    let c0 = traj.snapshots[0].center_of_mass();
    let c1 = fin.center_of_mass();
    let drift = c0.iter().zip(&c1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.json(
        "summary.json",
        &json!({
            "steps": traj.max_disp.len(),
            "final_time": t_end,
            "energy_initial": traj.energies[0],
            "energy_final": traj.energies.last(),
            "max_uptick": mon.max_uptick,
            "uptick_tolerance": tol,
            "center_of_mass_drift": drift,
            "truncation_bound": cfg.spec.truncation_bound(),
        }),
    )?;
    if mon.max_uptick > tol {
        return Err(CliError::Verification(format!("energy uptick {} above {tol}", mon.max_uptick)));
    }
    out.finish("simulate", &cfg, &c.config.iter().map(|p| p.as_path()).collect::<Vec<_>>(), Some(cfg.seed))
}

pub fn cantor(c: &Common, m: f64, alpha: f64, k: usize, probes_path: Option<&Path>) -> Result<(), CliError> {
    let tol = c.tolerance.unwrap_or(STEADY_TOL);
    let probes: Vec<f64> = match probes_path {
        Some(p) => read_json(p)?,
        None => default_probes(m, k.min(3)),
    };
    let v = verify_margin(m, alpha, k, &probes)?;
    let mut out = Outputs::new(&c.out)?;
    out.json("verification.json", &v)?;
    let prof = profile(m, alpha, k, -0.2, 1.2, 1401)?;
    out.csv("profile.csv", &["x", "V"], prof.iter().map(|&(x, y)| vec![num(x), num(y)]))?;
    let markers: Vec<(f64, f64)> = if k <= MAX_MATERIALIZED_LEVEL.min(12) {
        cantor_iterate(m, k)?.intervals.iter().map(|&(a, b)| (0.5 * (a + b), v.plateau)).collect()
    } else {
        vec![]
    };
    out.text("profile.svg", &svg::line(&prof, &markers, &format!("W_k * rho_k, M = {m}, alpha = {alpha}, k = {k}")))?;
    let steady = v.steady_residual <= tol;
    let margins = v.margins_pass.unwrap_or(true);
    if !steady || !margins {
        return Err(CliError::Verification(format!(
            "steady residual {} (tolerance {tol}), min margin {:?}",
            v.steady_residual, v.min_margin
        )));
    }
    let cfg = json!({"m": m, "alpha": alpha, "k": k, "probes": probes.len(), "tolerance": tol});
    let inputs: Vec<&Path> = probes_path.into_iter().collect();
    out.finish("cantor", &cfg, &inputs, None)
}

pub fn flic(c: &Common, deltas: &[f64]) -> Result<(), CliError> {
    let spec: PotentialSpec = match &c.config {
        Some(p) => read_json(p)?,
        None => hier_reference_spec(7),
    };
    spec.validate()?;
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(CliError::Usage("witness sizes must be positive".into()));
    }
    let tol = c.tolerance.unwrap_or(1e-12);
    let dmin = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let xi_max = WITNESS_CELLS as f64 * 2.0 / dmin;
    let scan = scan_windows(&spec, xi_max, 200_000)?;
    let mut out = Outputs::new(&c.out)?;
    out.json("windows.json", &scan)?;
    let mut results = vec![];
    let mut failures = vec![];
    for (i, &delta) in deltas.iter().enumerate() {
        if scan.windows.is_empty() {
            results.push(json!({"delta": delta, "found": false, "note": "no negative windows"}));
            continue;
        }
        match build_witness(&spec, delta, &scan) {
            Ok(w) => {
                let ok = w.energy < 0.0 && w.mean_residual <= tol && w.diameter <= delta;
                if !ok {
                    failures.push(format!("delta {delta}: mean residual {}, diameter {}", w.mean_residual, w.diameter));
                }
                results.push(json!({
                    "delta": delta,
                    "found": true,
                    "verified": ok,
                    "energy": w.energy,
                    "h": w.h,
                    "window": w.window,
                    "bump_scale": w.bump_scale,
                    "xi_j": w.xi_j,
                    "cells_inside": w.cells_inside,
                    "mean_residual": w.mean_residual,
                    "diameter": w.diameter,
                    "imag_residue": w.imag_residue,
                    "attempts": w.attempts,
                    "cells_file": format!("witness_{i}.csv"),
                }));
                let g = &w.grid;
                let mut header = coord_header(g.dim());
                header.push("mass".into());
                let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
                out.csv(
                    &format!("witness_{i}.csv"),
                    &h,
                    (0..g.len()).filter(|&l| g.values[l] != 0.0).map(|l| {
                        let mut r: Vec<String> = g.center(l).iter().map(|&v| num(v)).collect();
                        r.push(num(g.values[l]));
                        r
                    }),
                )?;
            }
            Err(Error::WitnessNotFound(msg)) => {
                results.push(json!({"delta": delta, "found": false, "note": msg}));
            }
            Err(e) => return Err(e.into()),
        }
    }
    out.json("witnesses.json", &results)?;
    if !failures.is_empty() {
        return Err(CliError::Verification(failures.join("; ")));
    }
    let cfg = json!({
        "spec": spec,
        "deltas": deltas,
        "xi_max": xi_max,
        "tolerance": tol,
        "truncation_bound": spec.truncation_bound(),
    });
    out.finish("flic", &cfg, &c.config.iter().map(|p| p.as_path()).collect::<Vec<_>>(), None)
}

fn default_ratio() -> f64 {
    0.15
}

fn default_gap() -> f64 {
    8.0
}

fn default_bins() -> usize {
    4
}

fn default_deltas() -> Vec<f64> {
    vec![0.1, 0.05]
}

fn default_eps_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// enables the steadiness residual
    #[serde(default)]
    pub spec: Option<PotentialSpec>,
    #[serde(default = "default_ratio")]
    pub ratio_hint: f64,
    /// largest linkage scale of the sweep; the bounding-box diameter if absent
    #[serde(default)]
    pub base_scale: Option<f64>,
    #[serde(default = "default_gap")]
    pub gap_factor: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_bins")]
    pub m_max: usize,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// superlevel threshold as a fraction of the peak histogram density
    #[serde(default = "default_eps_fraction")]
    pub eps0_fraction: f64,
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

/// Reads x0.. (or x, y, z) and optional weight columns; with a `t` column
/// only the rows at the largest t are kept.
pub fn read_snapshot(path: &Path) -> Result<ParticleEnsemble, CliError> {
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let mut coords: Vec<usize> = (0..3).map_while(|k| col(&format!("x{k}"))).collect();
    if coords.is_empty() {
        coords = ["x", "y", "z"].iter().map_while(|n| col(n)).collect();
    }
    if coords.is_empty() {
        return Err(bad("no coordinate columns (x0, x1, .. or x, y, z)".into()));
    }
    let tcol = col("t");
    let wcol = col("weight");
    let mut rows: Vec<(f64, Vec<f64>, Option<f64>)> = vec![];
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| -> Result<f64, CliError> {
            rec.get(i).unwrap_or("").trim().parse::<f64>().map_err(|e| bad(format!("line {:?}: {e}", rec.position().map(|p| p.line()))))
        };
        let t = match tcol {
            Some(i) => parse(i)?,
            None => 0.0,
        };
        let x = coords.iter().map(|&i| parse(i)).collect::<Result<Vec<_>, _>>()?;
        let w = wcol.map(parse).transpose()?;
        rows.push((t, x, w));
    }
    if rows.is_empty() {
        return Err(bad("no rows".into()));
    }
    let t_last = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    rows.retain(|r| r.0 == t_last);
    let d = coords.len();
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.1.clone()).collect();
    let p = if rows.iter().all(|r| r.2.is_some()) {
        ParticleEnsemble::new(d, flat, rows.iter().map(|r| r.2.unwrap()).collect())
    } else {
        ParticleEnsemble::uniform(d, flat)
    };
    p.map_err(|e| bad(e.to_string()))
}

pub fn analyze(c: &Common, snapshot: &Path) -> Result<(), CliError> {
    let cfg: AnalysisConfig = match &c.config {
        Some(p) => read_json(p)?,
        None => AnalysisConfig::default(),
    };
    let pts = read_snapshot(snapshot)?;
    let mut report = DiagnosticsReport::new();
    let mut out = Outputs::new(&c.out)?;

    let dim = box_dimension(&pts, cfg.scales.as_deref())?;
    out.csv(
        "box_counts.csv",
        &["eps", "count"],
        dim.scales.iter().zip(&dim.counts).map(|(e, n)| vec![num(*e), n.to_string()]),
    )?;
    report.push("box_dimension", json!({"n": pts.len()}), &dim, None);

    let (lo, hi) = pts.bbox();
    let diam = lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let base = cfg.base_scale.unwrap_or(diam.max(f64::MIN_POSITIVE));
    if pts.len() >= 4 {
        let h = hierarchy_layers(&pts, base, cfg.ratio_hint)?;
        let chain = h.longest_chain(cfg.ratio_hint / 2.0, 2.0 * cfg.ratio_hint);
        out.csv(
            "hierarchy.csv",
            &["layer", "clusters", "scale"],
            h.layers.iter().enumerate().map(|(i, l)| vec![i.to_string(), l.clusters.to_string(), num(l.scale)]),
        )?;
        report
            .push(
                "hierarchy_layers",
                json!({"base_scale": base, "ratio_hint": cfg.ratio_hint}),
                json!({"report": h, "chain_in_ratio_band": chain}),
                None,
            )
            .notes
            .push("chain_in_ratio_band counts consecutive layers with scale ratios in [hint/2, 2 hint]".into());
    }
    if pts.len() >= 2 {
        let iso = isolated_points(&pts, cfg.gap_factor)?;
        let pass = iso.is_empty();
        report.push("isolated_points", json!({"gap_factor": cfg.gap_factor}), json!({"indices": iso}), Some(pass));
    }
    if pts.dim == 2 {
        let a = asymmetry(&pts, cfg.bins, cfg.m_max)?;
        out.csv(
            "spectrum.csv",
            &["bin", "m", "magnitude"],
            a.magnitudes
                .iter()
                .enumerate()
                .flat_map(|(b, row)| row.iter().enumerate().map(move |(m, v)| vec![b.to_string(), (m + 1).to_string(), num(*v)])),
        )?;
        let threshold = 5.0 / (pts.len() as f64).sqrt();
        report.push("asymmetry", json!({"bins": cfg.bins, "m_max": cfg.m_max}), json!({"spectrum": a, "threshold_5_over_sqrt_n": threshold}), None);
    }
    for &delta in &cfg.deltas {
        let hist = Histogram::new(&pts, delta / 4.0)?;
        let eps0 = cfg.eps0_fraction * hist.peak();
        let s = superlevel_interior(&hist, eps0, delta)?;
        let pass = !s.contains_ball;
        report.push("superlevel_interior", json!({"delta": delta, "eps0_fraction": cfg.eps0_fraction}), &s, Some(pass));
    }
    let mut el_fail = None;
    if let Some(spec) = &cfg.spec {
        let med = {
            let nn = aggmin_core::fractal::nearest_neighbor(&pts);
            let mut s = nn.clone();
            s.sort_by(|a, b| a.total_cmp(b));
            s[s.len() / 2]
        };
        let r = el_residual(spec, &Measure::Particles(pts.clone()), 4.0 * med)?;
        let pass = c.tolerance.map(|t| r.steady_max <= t);
        if pass == Some(false) {
            el_fail = Some(r.steady_max);
        }
        report.push(
            "el_residual",
            json!({"spec": spec, "tolerance": c.tolerance, "truncation_bound": spec.truncation_bound()}),
            &r,
            pass,
        );
    }
    out.text("snapshot.svg", &svg::scatter(&plot_points(&pts), &format!("snapshot, N = {}", pts.len())))?;
    out.json("report.json", &report)?;
    if let Some(v) = el_fail {
        return Err(CliError::Verification(format!("steady residual {v} above {:?}", c.tolerance)));
    }
    out.finish("analyze", &cfg, &[snapshot], None)
}
