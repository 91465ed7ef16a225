use super::write_csv;
use crate::analytics::{
    f_mass, g_unnormalized, gamma_damping, partition_z_series, total_mass_series, DampingScale, KineticTime,
    SeriesPolicy,
};
use crate::error::{Error, Result};
use serde::Serialize;
use std::path::Path;

const PREDICT_KMAX: usize = 1_000_000;
const PREDICT_TOL: f64 = 1e-12;

/// One row of `distribution.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub t: f64,
    pub k: usize,
    pub f: f64,
    /// Empty when `Z_t` could not be certified.
    pub g: Option<f64>,
}

/// One row of `summary.csv`. Failed cells are empty and carry a status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionSummary {
    pub t: f64,
    pub z: Option<f64>,
    pub z_bound: Option<f64>,
    pub total_mass: Option<f64>,
    pub total_mass_bound: Option<f64>,
    pub giant_mass: Option<f64>,
    /// `γ(t)`; empty at `t = 0` and infinite at `t = 1`.
    pub gamma: Option<f64>,
    pub damping_rate: Option<f64>,
    /// Bound on the `g` mass beyond `k_max`.
    pub g_tail_bound: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub rows: Vec<PredictionRow>,
    pub summary: Vec<PredictionSummary>,
}

fn summarize(t: KineticTime<f64>, k_max: usize, rows: &mut Vec<PredictionRow>) -> PredictionSummary {
    let policy = SeriesPolicy::auto(t, PREDICT_KMAX, PREDICT_TOL);
    let mut status = Vec::new();
    let z = partition_z_series(t, &policy).map_err(|e| status.push(format!("Z: {e}"))).ok();
    let mass = total_mass_series(t, &policy).map_err(|e| status.push(format!("F: {e}"))).ok();
    let damping = match gamma_damping(t) {
        Ok(d) => Some(d),
        Err(Error::InvalidArgument(_)) => None,
        Err(e) => {
            status.push(format!("gamma: {e}"));
            None
        }
    };
    let mut g_sum = 0.0;
    for k in 1..=k_max {
        let g = z.map(|z| g_unnormalized(k, t) / z.value);
        g_sum += g.unwrap_or(0.0);
        rows.push(PredictionRow { t: t.get(), k, f: f_mass(k, t), g });
    }
    PredictionSummary {
        t: t.get(),
        z: z.map(|z| z.value),
        z_bound: z.map(|z| z.tail_bound),
        total_mass: mass.map(|m| m.value.min(1.0)),
        total_mass_bound: mass.map(|m| m.tail_bound),
        giant_mass: mass.map(|m| (1.0 - m.value).max(0.0)),
        gamma: damping.map(|d| match d {
            DampingScale::Finite(g) => g,
            DampingScale::Infinite => f64::INFINITY,
        }),
        damping_rate: damping.map(DampingScale::rate),
        g_tail_bound: z.map(|_| (1.0 - g_sum).max(0.0)),
        status: if status.is_empty() { "ok".into() } else { status.join("; ") },
    }
}

/// Tabulates `f_t(k)`, `g_t(k)` for `k ≤ k_max` and the scalar predictions
/// per grid time. Series failures are recorded per cell, not raised.
pub fn cmd_predict(t_grid: &[f64], k_max: usize) -> Result<PredictionTable> {
    if t_grid.is_empty() || k_max == 0 {
        return Err(Error::InvalidArgument("need a nonempty grid and k_max >= 1".into()));
    }
    let mut rows = Vec::with_capacity(t_grid.len() * k_max);
    let mut summary = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        summary.push(summarize(KineticTime::new(t)?, k_max, &mut rows));
    }
    Ok(PredictionTable { rows, summary })
}

/// Writes `distribution.csv` and `summary.csv` into `dir`.
pub fn write_prediction(table: &PredictionTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("distribution.csv"), &table.rows)?;
    write_csv(&dir.join("summary.csv"), &table.summary)
}
