use super::{mean_se, write_csv, write_json, DsmcBlock, Engine, ExperimentConfig, MdBlock, WORKERS_ENV};
use crate::clusters::{snapshots, ClusterSizeDistribution};
use crate::dsmc::{run_dsmc, DsmcConfig};
use crate::error::{Error, Result};
use crate::log::CollisionLog;
use crate::md::{self, kinetic_rate_estimate, measure_mean_free_time, MdConfig};
use crate::seed::replica_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Fraction of the MD horizon used to measure the mean free time.
pub const CALIBRATION_FRACTION: f64 = 0.2;

/// One row of a replica's `clusters.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub t: f64,
    pub k: usize,
    pub n: u64,
    pub f_emp: f64,
    pub g_emp: f64,
}

/// One row of `aggregate.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: f64,
    pub k: usize,
    pub n_mean: f64,
    pub n_se: f64,
    pub f_mean: f64,
    pub f_se: f64,
    pub g_mean: f64,
    pub g_se: f64,
}

/// MD time calibration written to `calibration.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mean_free_time: f64,
    pub window: (f64, f64),
    pub physical_horizon: f64,
    pub boltzmann_grad_parameter: f64,
    pub packing_fraction: f64,
    pub relative_energy_drift: f64,
    pub pair_events: usize,
    pub wall_events: u64,
    /// Grid times reached by the run, in kinetic units.
    pub kinetic_times: Vec<f64>,
    pub physical_times: Vec<f64>,
    /// Grid times beyond the physical horizon.
    pub uncovered: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaStatus {
    pub index: usize,
    pub seed: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub particles: usize,
    pub replicas: Vec<ReplicaStatus>,
    /// Set when at least one replica failed.
    pub partial: bool,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        super::read_json(&dir.join("manifest.json"))
    }

    pub fn successful(&self) -> impl Iterator<Item = &ReplicaStatus> {
        self.replicas.iter().filter(|r| r.ok)
    }
}

pub(crate) fn replica_dir(run: &Path, index: usize) -> PathBuf {
    run.join(format!("replica_{index:04}"))
}

struct ReplicaOutput {
    distributions: Vec<ClusterSizeDistribution>,
}

fn cluster_rows(distributions: &[ClusterSizeDistribution]) -> Vec<ClusterRow> {
    distributions
        .iter()
        .flat_map(|d| {
            d.counts.iter().map(move |(&k, &n)| ClusterRow {
                t: d.t,
                k,
                n,
                f_emp: d.mass_fraction(k),
                g_emp: d.cluster_fraction(k),
            })
        })
        .collect()
}

fn save_log(log: &CollisionLog, dir: &Path) -> Result<()> {
    log.save(&dir.join("log.jsonl"))
}

fn run_dsmc_replica(block: &DsmcBlock, grid: &[f64], seed: u64, dir: &Path) -> Result<ReplicaOutput> {
    let config = DsmcConfig {
        n: block.n,
        seed,
        t_end: *grid.last().expect("validated grid"),
        scattering: block.scattering.clone(),
        track_velocities: block.track_velocities,
        dim: block.dim,
        temperature: block.temperature,
    };
    let (log, _) = run_dsmc(&config)?;
    save_log(&log, dir)?;
    Ok(ReplicaOutput { distributions: snapshots(&log, grid)? })
}

/// Physical horizon used when the MD block leaves it open.
pub(crate) fn default_md_horizon(block: &MdBlock, grid: &[f64]) -> f64 {
    let rate = kinetic_rate_estimate(block.n, block.epsilon, block.dim, block.temperature);
    1.25 * grid.last().copied().unwrap_or(1.0) / rate
}

fn run_md_replica(block: &MdBlock, grid: &[f64], seed: u64, dir: &Path) -> Result<ReplicaOutput> {
    let horizon = block.t_end.unwrap_or_else(|| default_md_horizon(block, grid));
    let mut config = MdConfig::new(block.n, block.epsilon, block.dim, seed, horizon);
    config.temperature = block.temperature;
    config.max_pair_events = block.max_pair_events;
    config.log_walls = block.log_walls;
    let result = md::run(&config)?;
    save_log(&result.log, dir)?;
    let window = (0.0, CALIBRATION_FRACTION * horizon);
    let mft = measure_mean_free_time(&result.log, block.n, window)?;
    let (covered, uncovered): (Vec<f64>, Vec<f64>) = grid.iter().partition(|&&t| t * mft <= result.final_time);
    let physical: Vec<f64> = covered.iter().map(|t| t * mft).collect();
    let mut distributions = snapshots(&result.log, &physical)?;
    for (d, &t) in distributions.iter_mut().zip(&covered) {
        d.t = t;
    }
    let calibration = Calibration {
        mean_free_time: mft,
        window,
        physical_horizon: result.final_time,
        boltzmann_grad_parameter: config.boltzmann_grad_parameter(),
        packing_fraction: config.packing_fraction(),
        relative_energy_drift: result.relative_energy_drift(),
        pair_events: result.log.pairs().len(),
        wall_events: result.wall_events,
        kinetic_times: covered,
        physical_times: physical,
        uncovered,
    };
    write_json(&dir.join("calibration.json"), &calibration)?;
    Ok(ReplicaOutput { distributions })
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        let workers: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("{WORKERS_ENV}={value} is not a positive integer")))?;
        builder = builder.num_threads(workers);
    }
    builder.build().map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

/// Aggregates per-replica distributions into per-`(t, k)` means and
/// standard errors across replicas; absent sizes count as zero.
pub(crate) fn aggregate(per_replica: &[Vec<ClusterRow>], particles: usize) -> Vec<AggregateRow> {
    let mut cells: BTreeMap<(u64, usize), Vec<(u64, f64)>> = BTreeMap::new();
    let mut times: BTreeMap<u64, usize> = BTreeMap::new();
    for rows in per_replica {
        for row in rows {
            cells.entry((row.t.to_bits(), row.k)).or_default().push((row.n, row.g_emp));
        }
        let mut seen: Vec<u64> = rows.iter().map(|r| r.t.to_bits()).collect();
        seen.dedup();
        for t in seen {
            *times.entry(t).or_default() += 1;
        }
    }
    let mut out: Vec<AggregateRow> = cells
        .into_iter()
        .map(|((tb, k), values)| {
            let replicas = times[&tb];
            let mut n: Vec<f64> = values.iter().map(|v| v.0 as f64).collect();
            let mut g: Vec<f64> = values.iter().map(|v| v.1).collect();
            n.resize(replicas, 0.0);
            g.resize(replicas, 0.0);
            let f: Vec<f64> = n.iter().map(|c| k as f64 * c / particles as f64).collect();
            let (n_mean, n_se) = mean_se(&n);
            let (f_mean, f_se) = mean_se(&f);
            let (g_mean, g_se) = mean_se(&g);
            AggregateRow { t: f64::from_bits(tb), k, n_mean, n_se, f_mean, f_se, g_mean, g_se }
        })
        .collect();
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.k.cmp(&b.k)));
    out
}

/// Runs all replicas on a bounded worker pool and writes the run directory.
/// Failed replicas are recorded in the manifest and excluded from the
/// aggregate. A `predict` experiment writes the prediction tables instead.
pub fn cmd_run(config: &ExperimentConfig) -> Result<PathBuf> {
    config.validate()?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let particles = match config.engine {
        Engine::Predict => {
            let k_max = config.predict.as_ref().map_or(100, |p| p.k_max);
            let table = super::cmd_predict(&config.time_grid, k_max)?;
            super::write_prediction(&table, &dir)?;
            write_json(
                &dir.join("manifest.json"),
                &Manifest {
                    version: env!("CARGO_PKG_VERSION").into(),
                    config: config.clone(),
                    particles: 0,
                    replicas: Vec::new(),
                    partial: false,
                },
            )?;
            return Ok(dir);
        }
        Engine::Md => config.md.as_ref().expect("validated").n,
        Engine::Dsmc => config.dsmc.as_ref().expect("validated").n,
    };
    let seeds: Vec<u64> = (0..config.replicas).map(|r| replica_seed(config.master_seed, r)).collect();
    let pool = worker_pool()?;
    let results: Vec<Result<Vec<ClusterRow>>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(index, &seed)| {
                let rdir = replica_dir(&dir, index);
                std::fs::create_dir_all(&rdir).map_err(|e| Error::io(&rdir, e))?;
                let output = match config.engine {
                    Engine::Dsmc => run_dsmc_replica(config.dsmc.as_ref().expect("validated"), &config.time_grid, seed, &rdir),
                    Engine::Md => run_md_replica(config.md.as_ref().expect("validated"), &config.time_grid, seed, &rdir),
                    Engine::Predict => unreachable!(),
                }?;
                let rows = cluster_rows(&output.distributions);
                write_csv(&rdir.join("clusters.csv"), &rows)?;
                Ok(rows)
            })
            .collect()
    });
    let mut statuses = Vec::with_capacity(results.len());
    let mut good = Vec::new();
    for (index, result) in results.into_iter().enumerate() {
        let seed = seeds[index];
        match result {
            Ok(rows) => {
                statuses.push(ReplicaStatus { index, seed, ok: true, error: None });
                good.push(rows);
            }
            Err(e) => statuses.push(ReplicaStatus { index, seed, ok: false, error: Some(e.to_string()) }),
        }
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        particles,
        partial: good.len() < statuses.len(),
        replicas: statuses,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_csv(&dir.join("aggregate.csv"), &aggregate(&good, particles))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::AnalysisBlock;

    fn dsmc_config(dir: &Path, replicas: usize) -> ExperimentConfig {
        ExperimentConfig {
            engine: Engine::Dsmc,
            md: None,
            dsmc: Some(DsmcBlock {
                n: 2000,
                scattering: Default::default(),
                track_velocities: false,
                dim: 3,
                temperature: 1.0,
            }),
            predict: None,
            time_grid: vec![0.5, 1.0],
            replicas,
            master_seed: 3,
            output_dir: dir.to_path_buf(),
            analysis: AnalysisBlock::default(),
        }
    }

    #[test]
    fn aggregate_is_mean_of_replicas() {
        let a = vec![ClusterRow { t: 1.0, k: 1, n: 4, f_emp: 0.4, g_emp: 0.8 }, ClusterRow { t: 1.0, k: 2, n: 1, f_emp: 0.2, g_emp: 0.2 }];
        let b = vec![ClusterRow { t: 1.0, k: 1, n: 6, f_emp: 0.6, g_emp: 1.0 }];
        let agg = aggregate(&[a, b], 10);
        assert_eq!(agg.len(), 2);
        assert_eq!((agg[0].n_mean, agg[0].n_se), (5.0, 1.0));
        assert_eq!(agg[0].g_mean, 0.9);
        assert_eq!((agg[1].n_mean, agg[1].f_mean), (0.5, 0.1));
    }

    #[test]
    fn dsmc_run_layout_and_determinism() {
        let root = tempfile::tempdir().unwrap();
        let a = cmd_run(&dsmc_config(&root.path().join("a"), 3)).unwrap();
        let b = cmd_run(&dsmc_config(&root.path().join("b"), 3)).unwrap();
        for name in ["aggregate.csv", "replica_0002/clusters.csv", "replica_0000/log.jsonl"] {
            let x = std::fs::read(a.join(name)).unwrap();
            assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
        }
        let manifest = Manifest::load(&a).unwrap();
        assert_eq!(manifest.successful().count(), 3);
        assert!(!manifest.partial);
        assert_eq!(manifest.replicas[1].seed, replica_seed(3, 1));
        let header = std::fs::read_to_string(a.join("replica_0000/clusters.csv")).unwrap();
        assert!(header.starts_with("t,k,n,f_emp,g_emp\n"));
    }

    #[test]
    fn md_run_writes_calibration() {
        let root = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            engine: Engine::Md,
            md: Some(MdBlock {
                n: 1000,
                epsilon: 1e-3,
                dim: 2,
                temperature: 1.0,
                t_end: None,
                max_pair_events: None,
                log_walls: false,
            }),
            dsmc: None,
            predict: None,
            time_grid: vec![0.5, 1.0, 2.0],
            replicas: 2,
            master_seed: 1,
            output_dir: root.path().join("md"),
            analysis: AnalysisBlock::default(),
        };
        let dir = cmd_run(&cfg).unwrap();
        let cal: Calibration = super::super::read_json(&dir.join("replica_0001/calibration.json")).unwrap();
        assert!((cal.boltzmann_grad_parameter - 1.0).abs() < 1e-12);
        assert!(cal.mean_free_time > 0.0 && cal.relative_energy_drift < 1e-9);
        assert_eq!(cal.kinetic_times, vec![0.5, 1.0, 2.0]);
        assert!(cal.uncovered.is_empty());
    }

    #[test]
    fn failed_replicas_flag_partial_runs() {
        let root = tempfile::tempdir().unwrap();
        let mut cfg = dsmc_config(&root.path().join("bad"), 2);
        cfg.dsmc.as_mut().unwrap().n = 1;
        let dir = cmd_run(&cfg).unwrap();
        let manifest = Manifest::load(&dir).unwrap();
        assert!(manifest.partial);
        assert!(manifest.replicas.iter().all(|r| !r.ok && r.error.is_some()));
    }
}
