use super::run::{aggregate, replica_dir, AggregateRow, Calibration, ClusterRow, Manifest};
use super::{mean_se, read_csv, read_json, write_csv, write_json, AnalysisBlock, Engine};
use crate::analytics::{
    fit_power_law_at, g_unnormalized, gamma_damping, giant_mass, partition_z, KineticTime, SeriesPolicy,
};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub k: usize,
    pub n_mean: f64,
    pub n_se: f64,
    pub f_emp: f64,
    pub f_pred: f64,
    pub g_emp: f64,
    pub g_pred: f64,
    /// `(n_mean - N g_unnorm) / n_se`; empty when `n_se = 0`.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub t: f64,
    pub exponent: Option<f64>,
    pub damping_rate: Option<f64>,
    /// `1/γ(t)` from the closed form.
    pub damping_pred: Option<f64>,
    pub k_lo: usize,
    pub k_hi: usize,
    pub points: usize,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiantRow {
    pub t: f64,
    pub largest_fraction_mean: f64,
    pub largest_fraction_se: f64,
    pub second_largest_mean: f64,
    pub giant_pred: f64,
}

/// Grid time at which the mean second-largest cluster peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Takeoff {
    pub t: f64,
    pub largest_fraction: f64,
    pub second_largest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub mean_free_time: f64,
    pub mean_free_time_se: f64,
    pub boltzmann_grad_parameter: f64,
    pub packing_fraction: f64,
    pub max_relative_energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub engine: Engine,
    pub particles: usize,
    pub replicas_used: usize,
    pub partial: bool,
    /// Recomputed aggregates match `aggregate.csv`.
    pub aggregate_consistent: bool,
    pub calibration: Option<CalibrationSummary>,
    pub fits: Vec<FitRow>,
    pub giant: Vec<GiantRow>,
    pub takeoff: Option<Takeoff>,
    #[serde(skip)]
    pub rows: Vec<ComparisonRow>,
}

struct Snapshot {
    counts: BTreeMap<usize, u64>,
}

impl Snapshot {
    fn largest(&self) -> usize {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    fn second_largest(&self) -> usize {
        let mut it = self.counts.iter().rev();
        match it.next() {
            Some((&k, &c)) if c >= 2 => k,
            Some(_) => it.next().map_or(0, |(&k, _)| k),
            None => 0,
        }
    }
}

fn group_by_time(rows: &[ClusterRow]) -> BTreeMap<u64, Snapshot> {
    let mut out: BTreeMap<u64, Snapshot> = BTreeMap::new();
    for row in rows {
        out.entry(row.t.to_bits()).or_insert_with(|| Snapshot { counts: BTreeMap::new() }).counts.insert(row.k, row.n);
    }
    out
}

/// Pooled `g` over `[fit_k_min, K]` in logarithmic bins, where `K` is the
/// largest size with at least `min_tail_count` pooled clusters at or above
/// it (capped at `fit_k_max`). The cutoff depends on a cumulative count, so
/// single upward fluctuations cannot extend the range.
fn binned_g(snaps: &[&Snapshot], drop_largest: bool, a: &AnalysisBlock) -> (Vec<(f64, f64)>, usize) {
    let mut pooled: BTreeMap<usize, u64> = BTreeMap::new();
    let mut clusters = 0u64;
    for s in snaps {
        let largest = s.largest();
        for (&k, &n) in &s.counts {
            let n = if drop_largest && k == largest { n - 1 } else { n };
            clusters += n;
            *pooled.entry(k).or_default() += n;
        }
    }
    let mut cutoff = 0;
    let mut tail = 0u64;
    for (&k, &n) in pooled.range(a.fit_k_min..=a.fit_k_max).rev() {
        tail += n;
        if tail >= a.min_tail_count {
            cutoff = k;
            break;
        }
    }
    let mut points = Vec::new();
    let mut lo = a.fit_k_min;
    while cutoff > 0 && lo <= cutoff {
        let width = ((lo as f64 * (a.bin_ratio - 1.0)).floor() as usize).max(1);
        let hi = (lo + width - 1).min(cutoff);
        let count: u64 = pooled.range(lo..=hi).map(|(_, &n)| n).sum();
        if count > 0 {
            let center = ((lo * hi) as f64).sqrt();
            points.push((center, count as f64 / clusters as f64 / (hi - lo + 1) as f64));
        }
        lo = hi + 1;
    }
    (points, cutoff.max(a.fit_k_min))
}

fn fit_row(t: f64, snaps: &[&Snapshot], a: &AnalysisBlock) -> FitRow {
    let (points, k_hi) = binned_g(snaps, t > 1.0, a);
    let damping_pred = KineticTime::new(t).ok().and_then(|kt| gamma_damping(kt).ok()).map(|d| d.rate());
    let mut row = FitRow {
        t,
        exponent: None,
        damping_rate: None,
        damping_pred,
        k_lo: a.fit_k_min,
        k_hi,
        points: points.len(),
        residual: None,
        error: None,
    };
    match fit_power_law_at(points, a.fit_k_min, a.fit_k_max) {
        Ok(fit) => {
            row.exponent = Some(fit.exponent);
            row.damping_rate = Some(fit.damping_rate);
            row.residual = Some(fit.residual);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Builds theory-vs-simulation tables for a completed run directory and
/// writes them next to it. Output is a pure function of the directory.
pub fn cmd_analyze(dir: &Path) -> Result<ComparisonReport> {
    let manifest = Manifest::load(dir)?;
    let config = &manifest.config;
    if config.engine == Engine::Predict {
        return Err(Error::InvalidArgument("prediction runs have nothing to analyze".into()));
    }
    let n = manifest.particles;
    let ok: Vec<usize> = manifest.successful().map(|r| r.index).collect();
    if ok.is_empty() {
        return Err(Error::InsufficientData("no successful replicas".into()));
    }
    let mut per_replica = Vec::with_capacity(ok.len());
    let mut calibrations = Vec::new();
    for &index in &ok {
        let rdir = replica_dir(dir, index);
        let path = rdir.join("clusters.csv");
        if !path.exists() {
            return Err(Error::InsufficientData(format!("missing distribution {}", path.display())));
        }
        per_replica.push(read_csv::<ClusterRow>(&path)?);
        if config.engine == Engine::Md {
            calibrations.push(read_json::<Calibration>(&rdir.join("calibration.json"))?);
        }
    }

    let recomputed = aggregate(&per_replica, n);
    let stored: Vec<AggregateRow> = read_csv(&dir.join("aggregate.csv"))?;
    let aggregate_consistent = stored == recomputed;

    let grouped: Vec<BTreeMap<u64, Snapshot>> = per_replica.iter().map(|r| group_by_time(r)).collect();
    let mut times: Vec<u64> = grouped.iter().flat_map(|g| g.keys().copied()).collect();
    times.sort_by(|a, b| f64::from_bits(*a).total_cmp(&f64::from_bits(*b)));
    times.dedup();

    let mut by_cell: BTreeMap<(u64, usize), &AggregateRow> = BTreeMap::new();
    for row in &recomputed {
        by_cell.insert((row.t.to_bits(), row.k), row);
    }

    let a = &config.analysis;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut giant = Vec::new();
    for &tb in &times {
        let t = f64::from_bits(tb);
        let kt = KineticTime::new(t)?;
        let policy = SeriesPolicy::auto(kt, 1_000_000, 1e-12);
        let z = partition_z(kt, &policy)?;
        let mut ks: Vec<usize> = by_cell.range((tb, 0)..=(tb, usize::MAX)).map(|(&(_, k), _)| k).collect();
        ks.extend(1..=a.fit_k_max);
        ks.sort_unstable();
        ks.dedup();
        for k in ks {
            let g_un = g_unnormalized(k, kt);
            let (n_mean, n_se, f_emp, g_emp) =
                by_cell.get(&(tb, k)).map_or((0.0, 0.0, 0.0, 0.0), |r| (r.n_mean, r.n_se, r.f_mean, r.g_mean));
            let expected = n as f64 * g_un;
            rows.push(ComparisonRow {
                t,
                k,
                n_mean,
                n_se,
                f_emp,
                f_pred: k as f64 * g_un,
                g_emp,
                g_pred: g_un / z,
                z: (n_se > 0.0).then(|| (n_mean - expected) / n_se),
            });
        }

        let snaps: Vec<&Snapshot> = grouped.iter().filter_map(|g| g.get(&tb)).collect();
        fits.push(fit_row(t, &snaps, a));
        let largest: Vec<f64> = snaps.iter().map(|s| s.largest() as f64 / n as f64).collect();
        let second: Vec<f64> = snaps.iter().map(|s| s.second_largest() as f64).collect();
        let (lf, lf_se) = mean_se(&largest);
        giant.push(GiantRow {
            t,
            largest_fraction_mean: lf,
            largest_fraction_se: lf_se,
            second_largest_mean: mean_se(&second).0,
            giant_pred: giant_mass(kt, &policy)?,
        });
    }

    let takeoff = (giant.len() >= 3)
        .then(|| {
            giant.iter().max_by(|x, y| x.second_largest_mean.total_cmp(&y.second_largest_mean).then(y.t.total_cmp(&x.t)))
        })
        .flatten()
        .map(|g| Takeoff { t: g.t, largest_fraction: g.largest_fraction_mean, second_largest: g.second_largest_mean });

    let calibration = (!calibrations.is_empty()).then(|| {
        let mft: Vec<f64> = calibrations.iter().map(|c| c.mean_free_time).collect();
        let (m, se) = mean_se(&mft);
        CalibrationSummary {
            mean_free_time: m,
            mean_free_time_se: se,
            boltzmann_grad_parameter: calibrations[0].boltzmann_grad_parameter,
            packing_fraction: calibrations[0].packing_fraction,
            max_relative_energy_drift: calibrations.iter().map(|c| c.relative_energy_drift).fold(0.0, f64::max),
        }
    });

    let report = ComparisonReport {
        engine: config.engine,
        particles: n,
        replicas_used: ok.len(),
        partial: manifest.partial,
        aggregate_consistent,
        calibration,
        fits,
        giant,
        takeoff,
        rows,
    };
    write_csv(&dir.join("comparison.csv"), &report.rows)?;
    write_csv(&dir.join("fits.csv"), &report.fits)?;
    write_csv(&dir.join("giant.csv"), &report.giant)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{cmd_run, DsmcBlock, ExperimentConfig};

    fn small_run(dir: &Path) -> std::path::PathBuf {
        cmd_run(&ExperimentConfig {
            engine: Engine::Dsmc,
            md: None,
            dsmc: Some(DsmcBlock {
                n: 20_000,
                scattering: Default::default(),
                track_velocities: false,
                dim: 3,
                temperature: 1.0,
            }),
            predict: None,
            time_grid: vec![0.5, 1.0, 2.0],
            replicas: 4,
            master_seed: 17,
            output_dir: dir.to_path_buf(),
            analysis: AnalysisBlock { fit_k_min: 2, fit_k_max: 100, ..Default::default() },
        })
        .unwrap()
    }

    #[test]
    fn analysis_is_reproducible_and_consistent() {
        let root = tempfile::tempdir().unwrap();
        let dir = small_run(root.path());
        let report = cmd_analyze(&dir).unwrap();
        let first = std::fs::read(dir.join("comparison.csv")).unwrap();
        let first_report = std::fs::read(dir.join("report.json")).unwrap();
        let again = cmd_analyze(&dir).unwrap();
        assert_eq!(report, again);
        assert_eq!(first, std::fs::read(dir.join("comparison.csv")).unwrap());
        assert_eq!(first_report, std::fs::read(dir.join("report.json")).unwrap());
        assert!(report.aggregate_consistent);
        let header = String::from_utf8(first).unwrap();
        assert!(header.starts_with("t,k,n_mean,n_se,f_emp,f_pred,g_emp,g_pred,z\n"));

        let singles: Vec<_> = report.rows.iter().filter(|r| r.k == 1).collect();
        assert_eq!(singles.len(), 3);
        for r in singles {
            assert!((r.f_pred - (-r.t).exp()).abs() < 1e-15);
            assert!(r.z.unwrap().abs() < 4.0, "{r:?}");
        }
        let g2 = report.giant.iter().find(|g| g.t == 2.0).unwrap();
        assert!((g2.largest_fraction_mean - 0.7968).abs() < 0.02);
        assert!((g2.giant_pred - 0.796_812).abs() < 1e-5);
        assert!(report.giant[0].largest_fraction_mean < 0.01);
    }

    #[test]
    fn tampered_aggregate_is_detected() {
        let root = tempfile::tempdir().unwrap();
        let dir = small_run(root.path());
        let path = dir.join("aggregate.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[1] = lines[1].replacen(",", ",7", 2);
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert!(!cmd_analyze(&dir).unwrap().aggregate_consistent);
    }

    #[test]
    fn missing_distribution_is_reported() {
        let root = tempfile::tempdir().unwrap();
        let dir = small_run(root.path());
        std::fs::remove_file(dir.join("replica_0001/clusters.csv")).unwrap();
        assert!(matches!(cmd_analyze(&dir), Err(Error::InsufficientData(_))));
    }
}
