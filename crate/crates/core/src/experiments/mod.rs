//! Ensemble orchestration: prediction tables, replica runs, aggregation and
//! theory-vs-simulation reports.
//!
//! A run directory holds `manifest.json`, `aggregate.csv` and one
//! `replica_NNNN/` folder per replica with `log.jsonl`, `clusters.csv` and,
//! for MD, `calibration.json`. `analyze` adds `comparison.csv`, `fits.csv`,
//! `giant.csv` and `report.json`.

mod analyze;
mod predict;
mod run;
mod selfcheck;

pub use analyze::{cmd_analyze, ComparisonReport, ComparisonRow, FitRow, GiantRow, Takeoff};
pub use predict::{cmd_predict, write_prediction, PredictionSummary, PredictionTable};
pub use run::{cmd_run, Calibration, ClusterRow, Manifest, ReplicaStatus};
pub use selfcheck::{selfcheck, CheckResult};

use crate::dsmc::ScatteringSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Overrides the size of the replica worker pool.
pub const WORKERS_ENV: &str = "CLUSTERKIN_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Md,
    Dsmc,
    Predict,
}

fn default_dim() -> usize {
    3
}

fn default_two() -> usize {
    2
}

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_k_max() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsmcBlock {
    pub n: usize,
    #[serde(default)]
    pub scattering: ScatteringSpec,
    #[serde(default)]
    pub track_velocities: bool,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_one")]
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdBlock {
    pub n: usize,
    pub epsilon: f64,
    #[serde(default = "default_two")]
    pub dim: usize,
    #[serde(default = "default_one")]
    pub temperature: f64,
    /// Physical horizon. Defaults to 1.25 × the last grid time converted
    /// with the dilute-gas collision-rate estimate.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub max_pair_events: Option<u64>,
    #[serde(default = "default_true")]
    pub log_walls: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictBlock {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

/// Settings for `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBlock {
    pub fit_k_min: usize,
    pub fit_k_max: usize,
    /// The fit range ends at the largest size with at least this many
    /// pooled clusters at or above it.
    pub min_tail_count: u64,
    /// Bin width is `max(1, floor(k (bin_ratio - 1)))` at lower edge `k`.
    pub bin_ratio: f64,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self { fit_k_min: 5, fit_k_max: 300, min_tail_count: 50, bin_ratio: 1.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub md: Option<MdBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsmc: Option<DsmcBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictBlock>,
    /// Observation times in kinetic units (MD converts with the measured
    /// mean free time).
    pub time_grid: Vec<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub analysis: AnalysisBlock,
}

fn default_replicas() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if config.output_dir.is_relative() {
            if let Some(parent) = path.parent() {
                config.output_dir = parent.join(&config.output_dir);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_grid.is_empty() {
            return Err(Error::InvalidArgument("empty time grid".into()));
        }
        if self.time_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidArgument("time grid entries must be finite and nonnegative".into()));
        }
        if self.time_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidArgument("need at least one replica".into()));
        }
        let a = &self.analysis;
        if a.fit_k_min == 0 || a.fit_k_max < 4 * a.fit_k_min || !(a.bin_ratio > 1.0) {
            return Err(Error::InvalidArgument("bad analysis block".into()));
        }
        match self.engine {
            Engine::Md if self.md.is_none() => Err(Error::InvalidArgument("engine md needs an \"md\" block".into())),
            Engine::Dsmc if self.dsmc.is_none() => {
                Err(Error::InvalidArgument("engine dsmc needs a \"dsmc\" block".into()))
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

/// Mean and standard error of the mean (zero for a single value).
pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let text = r#"{"engine":"dsmc","dsmc":{"n":1000},"time_grid":[0.5,1.0],"replicas":2,"master_seed":9,"output_dir":"out"}"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.dsmc.as_ref().unwrap().dim, 3);
        assert_eq!(cfg.analysis, AnalysisBlock::default());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);

        let mut bad = cfg.clone();
        bad.time_grid = vec![1.0, 1.0];
        assert!(bad.validate().is_err());
        bad.time_grid = vec![1.0];
        bad.replicas = 0;
        assert!(bad.validate().is_err());
        let mut missing = cfg;
        missing.engine = Engine::Md;
        assert!(missing.validate().is_err());
    }

    #[test]
    fn standard_error() {
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
