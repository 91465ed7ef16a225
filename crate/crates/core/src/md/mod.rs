//! Event-driven dynamics of hard disks (2D) or spheres (3D) of diameter `ε`
//! in the reflecting unit box.
//!
//! Contact happens at center distance `ε`; a wall reflects a particle when
//! its center is `ε/2` from the wall. Pair collisions go to the
//! [`CollisionLog`] with the contact direction; wall bounces are logged
//! separately and never link particles into clusters.

mod engine;

pub use engine::{Simulation, StepOutcome};

use crate::error::{Error, Result};
use crate::log::{CollisionLog, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Packing fraction allowed for kinetic-regime runs.
pub const KINETIC_PACKING_LIMIT: f64 = 0.05;
/// Contacts whose normal relative speed is below this are treated as misses.
pub const GRAZING_TOLERANCE: f64 = 1e-12;
/// Largest tolerated overlap at an executed contact.
pub const OVERLAP_TOLERANCE: f64 = 1e-12;

const PLACEMENT_ATTEMPTS: usize = 100_000;

fn default_true() -> bool {
    true
}

fn default_temperature() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdConfig {
    pub n: usize,
    /// Sphere diameter in box units.
    pub epsilon: f64,
    pub dim: usize,
    pub seed: u64,
    /// Physical time horizon.
    pub t_end: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Stop after this many pair collisions even if `t_end` is not reached.
    #[serde(default)]
    pub max_pair_events: Option<u64>,
    /// Reject configurations above [`KINETIC_PACKING_LIMIT`].
    #[serde(default = "default_true")]
    pub enforce_kinetic_regime: bool,
    #[serde(default = "default_true")]
    pub log_walls: bool,
}

impl MdConfig {
    pub fn new(n: usize, epsilon: f64, dim: usize, seed: u64, t_end: f64) -> Self {
        Self {
            n,
            epsilon,
            dim,
            seed,
            t_end,
            temperature: 1.0,
            max_pair_events: None,
            enforce_kinetic_regime: true,
            log_walls: true,
        }
    }

    /// `N ε^{d-1}`, order one in the low-density kinetic scaling.
    pub fn boltzmann_grad_parameter(&self) -> f64 {
        self.n as f64 * self.epsilon.powi(self.dim as i32 - 1)
    }

    /// Volume fraction occupied by the spheres.
    pub fn packing_fraction(&self) -> f64 {
        let r = 0.5 * self.epsilon;
        let one = match self.dim {
            2 => std::f64::consts::PI * r * r,
            _ => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        };
        self.n as f64 * one
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!("dimension {} not supported", self.dim)));
        }
        if self.n == 0 || self.n > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("bad particle count {}", self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("diameter {} outside (0, 1)", self.epsilon)));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidArgument("temperature must be positive".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad horizon {}", self.t_end)));
        }
        if self.enforce_kinetic_regime && self.packing_fraction() >= KINETIC_PACKING_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "packing fraction {:.3e} not below kinetic limit {KINETIC_PACKING_LIMIT}",
                self.packing_fraction()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub id: Label,
    pub x: [f64; 3],
    pub v: [f64; 3],
}

impl ParticleState {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.v.iter().map(|c| c * c).sum::<f64>()
    }
}

fn grid_key(x: &[f64; 3], side: f64) -> [i64; 3] {
    std::array::from_fn(|a| (x[a] / side).floor() as i64)
}

/// Uniform non-overlapping positions in `[ε/2, 1-ε/2]^d` by rejection;
/// Gaussian velocities with per-component variance `temperature`.
pub fn sample_initial(config: &MdConfig) -> Result<Vec<ParticleState>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let eps = config.epsilon;
    let dim = config.dim;
    let lo = 0.5 * eps;
    let span = 1.0 - eps;
    let side = eps.max(1e-6);
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(config.n);
    for index in 0..config.n {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let mut x = [0.0; 3];
            x.iter_mut().take(dim).for_each(|c| *c = lo + span * rng.random::<f64>());
            let key = grid_key(&x, side);
            let mut clear = true;
            'scan: for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    for dz in if dim == 3 { -1..=1i64 } else { 0..=0 } {
                        if let Some(members) = grid.get(&[key[0] + dx, key[1] + dy, key[2] + dz]) {
                            for &m in members {
                                let d2: f64 = (0..3).map(|a| (positions[m][a] - x[a]).powi(2)).sum();
                                if d2 < eps * eps {
                                    clear = false;
                                    break 'scan;
                                }
                            }
                        }
                    }
                }
            }
            if clear {
                placed = Some((x, key));
                break;
            }
        }
        let (x, key) = placed.ok_or(Error::Placement { index, attempts: PLACEMENT_ATTEMPTS })?;
        grid.entry(key).or_default().push(index);
        positions.push(x);
    }
    let normal = Normal::new(0.0, config.temperature.sqrt()).expect("positive variance");
    Ok(positions
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut v = [0.0; 3];
            v.iter_mut().take(dim).for_each(|c| *c = normal.sample(&mut rng));
            ParticleState { id: i as Label + 1, x, v }
        })
        .collect())
}

/// Time until two free-flying particles reach center distance `epsilon`.
///
/// `None` for receding, parallel or grazing pairs. A pair already inside
/// contact distance and approaching collides immediately.
pub fn predict_pair(a: &ParticleState, b: &ParticleState, epsilon: f64) -> Option<f64> {
    predict_contact(&a.x, &a.v, &b.x, &b.v, epsilon)
}

pub(crate) fn predict_contact(xa: &[f64; 3], va: &[f64; 3], xb: &[f64; 3], vb: &[f64; 3], eps: f64) -> Option<f64> {
    let dx: [f64; 3] = std::array::from_fn(|k| xb[k] - xa[k]);
    let dv: [f64; 3] = std::array::from_fn(|k| vb[k] - va[k]);
    let b: f64 = (0..3).map(|k| dx[k] * dv[k]).sum();
    if b >= 0.0 {
        return None;
    }
    let a: f64 = (0..3).map(|k| dv[k] * dv[k]).sum();
    let c: f64 = (0..3).map(|k| dx[k] * dx[k]).sum::<f64>() - eps * eps;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    let root = disc.sqrt();
    // normal relative speed at contact is √disc / ε
    if root < GRAZING_TOLERANCE * eps {
        return None;
    }
    Some((c / (root - b)).max(0.0))
}

/// Pair and wall collisions of one run.
#[derive(Debug, Clone)]
pub struct MdRun {
    pub final_states: Vec<ParticleState>,
    pub log: CollisionLog,
    pub wall_events: u64,
    pub final_time: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
}

impl MdRun {
    pub fn relative_energy_drift(&self) -> f64 {
        ((self.final_energy - self.initial_energy) / self.initial_energy).abs()
    }
}

/// Samples an initial state and advances it to `t_end` (or until
/// `max_pair_events` pair collisions).
pub fn run(config: &MdConfig) -> Result<MdRun> {
    let states = sample_initial(config)?;
    let mut sim = Simulation::new(config.epsilon, config.dim, states)?;
    sim.set_log_walls(config.log_walls);
    let initial_energy = sim.kinetic_energy();
    sim.run_until(config.t_end, config.max_pair_events)?;
    let final_time = sim.time();
    let final_energy = sim.kinetic_energy();
    let wall_events = sim.wall_events();
    let final_states = sim.states();
    Ok(MdRun { final_states, log: sim.into_log(), wall_events, final_time, initial_energy, final_energy })
}

/// Per-particle mean free time `N |window| / (2 · #pair events in window)`.
pub fn measure_mean_free_time(log: &CollisionLog, n: usize, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    if !(b > a) {
        return Err(Error::InvalidArgument(format!("empty window [{a}, {b}]")));
    }
    let events = log.pairs_in(a, b);
    if events < 100 {
        return Err(Error::InsufficientData(format!("{events} pair events in [{a}, {b}], need 100")));
    }
    Ok(n as f64 * (b - a) / (2.0 * events as f64))
}

/// Dilute-gas collision rate per particle, `n σ ⟨|v_rel|⟩`, for unit mass
/// and per-component velocity variance `temperature`; ignores the wall
/// exclusion layer and excluded-volume corrections.
pub fn kinetic_rate_estimate(n: usize, epsilon: f64, dim: usize, temperature: f64) -> f64 {
    let density = n as f64;
    match dim {
        2 => density * 2.0 * epsilon * (std::f64::consts::PI * temperature).sqrt(),
        _ => density * std::f64::consts::PI * epsilon * epsilon * 4.0 * (temperature / std::f64::consts::PI).sqrt(),
    }
}
