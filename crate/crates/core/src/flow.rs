//! N-particle gradient flow x_i' = -sum_j w_j W'(r_ij) (x_i - x_j)/r_ij
//! integrated with classical RK4.

use crate::energy::particle_energy;
use crate::error::{param, Error, Result};
use crate::measure::ParticleEnsemble;
use crate::potential::{Kernel, PotentialSpec, RadialKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Interleaved pair blocks; a fixed count keeps the summation order, and
/// so the trajectory, independent of the thread count.
const PAIR_BLOCKS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Independent uniform points in the box prod [lo_k, hi_k]; a single
    /// bound applies to every axis.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    Explicit { points: Vec<Vec<f64>> },
    /// Evenly spaced angles on a circle (d = 2), each shifted by up to
    /// `jitter` of the spacing.
    Ring {
        radius: f64,
        #[serde(default)]
        jitter: f64,
    },
}

fn default_r_min() -> f64 {
    1e-8
}

fn default_bound() -> f64 {
    1e6
}

fn default_stride() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: PotentialSpec,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub init: Init,
    #[serde(default)]
    pub seed: u64,
    /// steps between stored snapshots
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_bound")]
    pub blowup_bound: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n == 0 {
            return param("particle count must be at least 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return param(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return param(format!("final time {} is below dt = {}", self.t_final, self.dt));
        }
        if self.snapshot_stride == 0 {
            return param("snapshot stride must be at least 1");
        }
        if !(self.r_min > 0.0) {
            return param("r_min must be positive");
        }
        if !(self.blowup_bound > 0.0) {
            return param("blow-up bound must be positive");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ParticleEnsemble>,
    /// energy at each snapshot
    pub energies: Vec<f64>,
    /// max |x_i(t + dt) - x_i(t)| for every step
    pub max_disp: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &ParticleEnsemble {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyMonitor {
    pub max_uptick: f64,
}

pub fn initial_state(cfg: &SimConfig) -> Result<ParticleEnsemble> {
    let d = cfg.spec.dim();
    let n = cfg.n;
    let coords = match &cfg.init {
        Init::UniformBox { lo, hi } => {
            let axis = |v: &Vec<f64>, k: usize| if v.len() == 1 { v[0] } else { v[k] };
            if !(lo.len() == 1 || lo.len() == d) || lo.len() != hi.len() {
                return param(format!("box bounds need 1 or {d} entries"));
            }
            for k in 0..d {
                if !(axis(lo, k) < axis(hi, k)) {
                    return param("box needs lo < hi on every axis");
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut c = Vec::with_capacity(n * d);
            for _ in 0..n {
                for k in 0..d {
                    c.push(rng.gen_range(axis(lo, k)..axis(hi, k)));
                }
            }
            c
        }
        Init::Explicit { points } => {
            if points.len() != n {
                return param(format!("{} explicit points for n = {n}", points.len()));
            }
            if points.iter().any(|p| p.len() != d) {
                return Err(Error::Dimension { expected: d, got: points[0].len() });
            }
            points.iter().flatten().copied().collect()
        }
        Init::Ring { radius, jitter } => {
            if d != 2 {
                return Err(Error::Dimension { expected: 2, got: d });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut c = Vec::with_capacity(2 * n);
            for i in 0..n {
                let shift = if *jitter > 0.0 { jitter * rng.gen_range(-1.0..1.0) } else { 0.0 };
                let th = 2.0 * PI * (i as f64 + shift) / n as f64;
                c.push(radius * th.cos());
                c.push(radius * th.sin());
            }
            c
        }
    };
    ParticleEnsemble::uniform(d, coords)
}

/// Velocity field for positions `x` (flat, point-major).
pub fn velocity<K: RadialKernel + ?Sized>(
    kernel: &K,
    d: usize,
    x: &[f64],
    weights: &[f64],
    r_min: f64,
) -> Vec<f64> {
    let n = weights.len();
    let blocks = PAIR_BLOCKS.min(n.max(1));
    let w1_min = kernel.d1(r_min);
    let parts: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; n * d];
            let mut diff = [0.0f64; 3];
            let mut i = b;
            while i < n {
                let xi = &x[i * d..(i + 1) * d];
                for j in (i + 1)..n {
                    let xj = &x[j * d..(j + 1) * d];
                    let mut r2 = 0.0;
                    for k in 0..d {
                        diff[k] = xi[k] - xj[k];
                        r2 += diff[k] * diff[k];
                    }
                    if r2 == 0.0 {
                        continue;
                    }
                    let r = r2.sqrt();
                    let g = if r < r_min { w1_min } else { kernel.d1(r) } / r;
                    for k in 0..d {
                        let f = g * diff[k];
                        acc[i * d + k] -= weights[j] * f;
                        acc[j * d + k] += weights[i] * f;
                    }
                }
                i += blocks;
            }
            acc
        })
        .collect();
    let mut v = vec![0.0; n * d];
    for p in &parts {
        for (a, b) in v.iter_mut().zip(p) {
            *a += b;
        }
    }
    v
}

fn axpy(x: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(p, q)| p + a * q).collect()
}

pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let kernel: Kernel = cfg.spec.kernel()?;
    let start = initial_state(cfg)?;
    simulate_from(cfg, &kernel, start)
}

/// Runs the flow from a given state, ignoring `cfg.init`.
pub fn simulate_from(cfg: &SimConfig, kernel: &Kernel, start: ParticleEnsemble) -> Result<Trajectory> {
    cfg.validate()?;
    let d = start.dim;
    if d != cfg.spec.dim() {
        return Err(Error::Dimension { expected: cfg.spec.dim(), got: d });
    }
    let w = start.weights.clone();
    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut x = start.coords.clone();
    let mut traj = Trajectory {
        times: vec![0.0],
        energies: vec![particle_energy(kernel, &start)?],
        snapshots: vec![start],
        max_disp: Vec::with_capacity(steps),
    };
    for step in 1..=steps {
        let k1 = velocity(kernel, d, &x, &w, cfg.r_min);
        let k2 = velocity(kernel, d, &axpy(&x, 0.5 * dt, &k1), &w, cfg.r_min);
        let k3 = velocity(kernel, d, &axpy(&x, 0.5 * dt, &k2), &w, cfg.r_min);
        let k4 = velocity(kernel, d, &axpy(&x, dt, &k3), &w, cfg.r_min);
        let t = step as f64 * dt;
        let mut disp = 0.0f64;
        for i in 0..w.len() {
            let mut s = 0.0;
            for k in 0..d {
                let m = i * d + k;
                let dx = dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
                x[m] += dx;
                s += dx * dx;
                if !x[m].is_finite() {
                    return Err(Error::BlowUp { t, reason: format!("particle {i} is not finite") });
                }
                if x[m].abs() > cfg.blowup_bound {
                    return Err(Error::BlowUp {
                        t,
                        reason: format!("particle {i} left the bound {}", cfg.blowup_bound),
                    });
                }
            }
            disp = disp.max(s.sqrt());
        }
        traj.max_disp.push(disp);
        if step % cfg.snapshot_stride == 0 || step == steps {
            let snap = ParticleEnsemble::new(d, x.clone(), w.clone())?;
            traj.energies.push(particle_energy(kernel, &snap)?);
            traj.times.push(t);
            traj.snapshots.push(snap);
        }
    }
    Ok(traj)
}

pub fn energy_monitor(traj: &Trajectory) -> EnergyMonitor {
    let max_uptick = traj
        .energies
        .windows(2)
        .map(|e| (e[1] - e[0]) / e[0].abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    EnergyMonitor { max_uptick }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(spec: PotentialSpec, init: Init, n: usize, dt: f64, t_final: f64) -> SimConfig {
        SimConfig {
            spec,
            n,
            dt,
            t_final,
            init,
            seed: 1,
            snapshot_stride: 10,
            r_min: 1e-8,
            blowup_bound: 1e6,
        }
    }

    fn hier() -> PotentialSpec {
        PotentialSpec::HierGauss { d: 2, alpha: 3.0, lambda: 0.15, c_w: 0.25, k_trunc: 5, c2: 0.2 }
    }

    fn boxed(lo: f64, hi: f64) -> Init {
        Init::UniformBox { lo: vec![lo], hi: vec![hi] }
    }

    #[test]
    fn single_particle_stays_put() {
        let c = cfg(hier(), Init::Explicit { points: vec![vec![0.3, -0.2]] }, 1, 0.1, 2.0);
        let t = simulate(&c).unwrap();
        for s in &t.snapshots {
            assert_eq!(s.coords, vec![0.3, -0.2]);
        }
        assert!(energy_monitor(&t).max_uptick <= 1e-12);
    }

    #[test]
    fn two_bodies_settle_at_unit_distance() {
        let spec = PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 1 };
        let c = cfg(spec, Init::Explicit { points: vec![vec![0.0], vec![0.3]] }, 2, 0.05, 60.0);
        let t = simulate(&c).unwrap();
        let f = t.final_state();
        assert!(((f.coords[1] - f.coords[0]).abs() - 1.0).abs() < 1e-8);
        // center of mass is untouched
        assert!((f.coords[0] + f.coords[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn stationary_pair_has_no_uptick() {
        let spec = PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 1 };
        let c = cfg(spec, Init::Explicit { points: vec![vec![-0.5], vec![0.5]] }, 2, 0.01, 1.0);
        assert!(energy_monitor(&simulate(&c).unwrap()).max_uptick <= 1e-12);
    }

    #[test]
    fn huge_step_is_flagged() {
        let spec = PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 2 };
        let mut c = cfg(spec, boxed(0.0, 0.5), 30, 10.0, 1000.0);
        c.snapshot_stride = 1;
        match simulate(&c) {
            Err(Error::BlowUp { .. }) => {}
            Ok(t) => assert!(energy_monitor(&t).max_uptick > 0.0),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn deterministic_and_energy_decreasing() {
        let c = cfg(hier(), boxed(0.0, 0.5), 60, 0.01, 2.0);
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a, b);
        assert!(energy_monitor(&a).max_uptick <= 1e-9);
        assert!(a.energies.last().unwrap() < &a.energies[0]);
    }

    #[test]
    fn center_of_mass_is_conserved() {
        let c = cfg(hier(), boxed(0.0, 0.5), 80, 0.01, 2.0);
        let t = simulate(&c).unwrap();
        let c0 = t.snapshots[0].center_of_mass();
        let c1 = t.final_state().center_of_mass();
        for k in 0..2 {
            assert!((c0[k] - c1[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let c = cfg(hier(), boxed(0.0, 0.5), 50, 0.01, 0.5);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| simulate(&c).unwrap());
        let b = three.install(|| simulate(&c).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn ring_init_and_errors() {
        let spec = PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 2 };
        let c = cfg(spec.clone(), Init::Ring { radius: 0.5, jitter: 0.0 }, 8, 0.1, 1.0);
        let p = initial_state(&c).unwrap();
        for i in 0..8 {
            let q = p.point(i);
            assert!(((q[0] * q[0] + q[1] * q[1]).sqrt() - 0.5).abs() < 1e-15);
        }
        let mut bad = c.clone();
        bad.dt = 0.0;
        assert!(simulate(&bad).is_err());
        let mut bad = c.clone();
        bad.init = Init::Explicit { points: vec![vec![0.0, 0.0]] };
        assert!(simulate(&bad).is_err());
        let one_d = cfg(
            PotentialSpec::PowerLaw { a: 2.0, b: 1.0, d: 1 },
            Init::Ring { radius: 1.0, jitter: 0.0 },
            4,
            0.1,
            1.0,
        );
        assert!(matches!(simulate(&one_d), Err(Error::Dimension { .. })));
    }

    #[test]
    fn config_json_defaults() {
        let j = r#"{"spec": {"family": "power_law", "a": 2.0, "b": 1.0, "d": 2},
                    "n": 10, "dt": 0.01, "t_final": 1.0,
                    "init": {"kind": "uniform_box", "lo": [0.0], "hi": [0.5]}}"#;
        let c: SimConfig = serde_json::from_str(j).unwrap();
        assert_eq!(c.r_min, 1e-8);
        assert_eq!(c.blowup_bound, 1e6);
        assert_eq!(c.seed, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn translation_and_permutation_equivariant(
            seed in 0u64..1000,
            vx in -3.0f64..3.0,
            vy in -3.0f64..3.0,
        ) {
            let mut c = cfg(hier(), boxed(0.0, 0.5), 12, 0.01, 0.3);
            c.seed = seed;
            let kernel = c.spec.kernel().unwrap();
            let p = initial_state(&c).unwrap();
            let a = simulate_from(&c, &kernel, p.clone()).unwrap();
            let b = simulate_from(&c, &kernel, p.translated(&[vx, vy])).unwrap();
            let v = [vx, vy];
            for (m, (s, t)) in a.final_state().coords.iter().zip(&b.final_state().coords).enumerate() {
                prop_assert!((t - s - v[m % 2]).abs() < 1e-10);
            }
            // reverse the particle order
            let n = p.len();
            let rev: Vec<f64> = (0..n).rev().flat_map(|i| p.point(i).to_vec()).collect();
            let pr = ParticleEnsemble::uniform(2, rev).unwrap();
            let r = simulate_from(&c, &kernel, pr).unwrap();
            for i in 0..n {
                let u = a.final_state().point(i);
                let v = r.final_state().point(n - 1 - i);
                prop_assert!((u[0] - v[0]).abs() < 1e-12 && (u[1] - v[1]).abs() < 1e-12);
            }
        }
    }
}
