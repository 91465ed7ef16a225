//! Stochastic particle realization of the spatially homogeneous
//! Maxwell-molecule gas.
//!
//! Every particle collides at unit rate irrespective of its velocity, so
//! pair events form a Poisson stream of total rate `N/2` and each event picks
//! an unordered pair uniformly. Cluster statistics depend on the event stream
//! only; velocities are optional and exist for conservation diagnostics.

use crate::collision::{apply_collision, sample_scattering, ScatteringLaw};
use crate::error::{Error, Result};
use crate::log::{CollisionLog, Label, PairEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScatteringSpec {
    #[default]
    IsotropicHemisphere,
    /// `g(cos θ)` on a uniform grid of `cos θ ∈ [0, 1]`.
    Tabulated { values: Vec<f64> },
}

fn default_dim() -> usize {
    3
}

fn default_temperature() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmcConfig {
    pub n: usize,
    pub seed: u64,
    /// Kinetic time horizon.
    pub t_end: f64,
    #[serde(default)]
    pub scattering: ScatteringSpec,
    #[serde(default)]
    pub track_velocities: bool,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

impl DsmcConfig {
    pub fn new(n: usize, seed: u64, t_end: f64) -> Self {
        Self {
            n,
            seed,
            t_end,
            scattering: ScatteringSpec::IsotropicHemisphere,
            track_velocities: false,
            dim: 3,
            temperature: 1.0,
        }
    }

    fn validate(&self) -> Result<ScatteringLaw<f64>> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("DSMC needs N >= 2, got {}", self.n)));
        }
        if self.n > u32::MAX as usize {
            return Err(Error::InvalidArgument("N exceeds label range".into()));
        }
        if !self.t_end.is_finite() || self.t_end < 0.0 {
            return Err(Error::InvalidArgument(format!("bad horizon {}", self.t_end)));
        }
        if !(2..=3).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!("dimension {} not supported", self.dim)));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidArgument("temperature must be positive".into()));
        }
        match &self.scattering {
            ScatteringSpec::IsotropicHemisphere => Ok(ScatteringLaw::IsotropicHemisphere),
            ScatteringSpec::Tabulated { values } => ScatteringLaw::tabulated(values.clone(), self.dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsmcState {
    pub velocities: Option<Vec<[f64; 3]>>,
    pub collisions: Vec<u32>,
    pub time: f64,
}

impl DsmcState {
    pub fn momentum(&self) -> Option<[f64; 3]> {
        self.velocities.as_ref().map(|vs| {
            vs.iter().fold([0.0; 3], |mut acc, v| {
                (0..3).for_each(|i| acc[i] += v[i]);
                acc
            })
        })
    }

    pub fn kinetic_energy(&self) -> Option<f64> {
        self.velocities
            .as_ref()
            .map(|vs| vs.iter().map(|v| 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).sum())
    }
}

fn sample_omega(dim: usize, vrel: &[f64; 3], law: &ScatteringLaw<f64>, rng: &mut ChaCha8Rng) -> Result<[f64; 3]> {
    Ok(match dim {
        2 => {
            let w = sample_scattering(&[vrel[0], vrel[1]], law, rng)?;
            [w[0], w[1], 0.0]
        }
        _ => sample_scattering(vrel, law, rng)?,
    })
}

/// Initial velocities: isotropic Gaussian with per-component variance
/// `temperature`.
fn initial_velocities(config: &DsmcConfig, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let normal = Normal::new(0.0, config.temperature.sqrt()).expect("positive variance");
    (0..config.n)
        .map(|_| {
            let mut v = [0.0; 3];
            v.iter_mut().take(config.dim).for_each(|c| *c = normal.sample(rng));
            v
        })
        .collect()
}

pub fn run_dsmc(config: &DsmcConfig) -> Result<(CollisionLog, DsmcState)> {
    let law = config.validate()?;
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut velocities = config.track_velocities.then(|| initial_velocities(config, &mut rng));
    let waiting = Exp::new(n as f64 / 2.0).expect("positive rate");
    let mut log = CollisionLog::new(n, config.dim);
    let mut collisions = vec![0u32; n];
    let mut time = 0.0;
    loop {
        time += waiting.sample(&mut rng);
        if time > config.t_end {
            break;
        }
        let (i, j, omega) = loop {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let Some(vs) = velocities.as_mut() else {
                break (i, j, None);
            };
            let vrel = [vs[i][0] - vs[j][0], vs[i][1] - vs[j][1], vs[i][2] - vs[j][2]];
            if vrel == [0.0; 3] {
                continue;
            }
            let omega = sample_omega(config.dim, &vrel, &law, &mut rng)?;
            let (a, b) = if i < j {
                let (lo, hi) = vs.split_at_mut(j);
                (&mut lo[i], &mut hi[0])
            } else {
                let (lo, hi) = vs.split_at_mut(i);
                (&mut hi[0], &mut lo[j])
            };
            apply_collision(a, b, &omega);
            break (i, j, Some(omega));
        };
        collisions[i] += 1;
        collisions[j] += 1;
        log.push_pair(PairEvent { t: time, i: i as Label + 1, j: j as Label + 1, omega })?;
    }
    Ok((log, DsmcState { velocities, collisions, time: config.t_end }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_particle() {
        assert!(run_dsmc(&DsmcConfig::new(1, 0, 1.0)).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let mut cfg = DsmcConfig::new(500, 9, 2.0);
        cfg.track_velocities = true;
        let (a, sa) = run_dsmc(&cfg).unwrap();
        let (b, sb) = run_dsmc(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        cfg.seed = 10;
        assert_ne!(run_dsmc(&cfg).unwrap().0, a);
    }

    #[test]
    fn pair_vacancy_probability() {
        // N = 2 has total event rate 1; P(no event by t = 1) = 1/e
        let reps = 10_000;
        let empty = (0..reps)
            .filter(|&s| run_dsmc(&DsmcConfig::new(2, s, 1.0)).unwrap().0.pairs().is_empty())
            .count();
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((empty as f64 / reps as f64 - p).abs() < 3.0 * se, "{empty}");
    }

    #[test]
    fn unit_per_particle_rate() {
        let (_, state) = run_dsmc(&DsmcConfig::new(10_000, 3, 2.0)).unwrap();
        let mean = state.collisions.iter().map(|&c| c as f64).sum::<f64>() / 10_000.0;
        assert!((mean - 2.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn conservation_with_velocities() {
        for dim in [2, 3] {
            let mut cfg = DsmcConfig::new(2000, 17, 3.0);
            cfg.track_velocities = true;
            cfg.dim = dim;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let initial = DsmcState { velocities: Some(initial_velocities(&cfg, &mut rng)), collisions: vec![], time: 0.0 };
            let (log, state) = run_dsmc(&cfg).unwrap();
            assert!(log.pairs().iter().all(|e| e.omega.is_some()));
            let (p0, p1) = (initial.momentum().unwrap(), state.momentum().unwrap());
            for c in 0..3 {
                assert!((p0[c] - p1[c]).abs() < 1e-10, "dim {dim}: {p0:?} vs {p1:?}");
            }
            let (e0, e1) = (initial.kinetic_energy().unwrap(), state.kinetic_energy().unwrap());
            assert!(((e0 - e1) / e0).abs() < 1e-12);
        }
    }

    #[test]
    fn free_fraction_matches_exponential() {
        let (_, state) = run_dsmc(&DsmcConfig::new(100_000, 21, 1.0)).unwrap();
        let free = state.collisions.iter().filter(|&&c| c == 0).count() as f64 / 1e5;
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / 1e5).sqrt();
        assert!((free - p).abs() < 3.0 * se, "{free}");
    }
}
