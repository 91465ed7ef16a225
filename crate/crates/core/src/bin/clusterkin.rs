use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use clusterkin::experiments::{cmd_analyze, cmd_predict, cmd_run, selfcheck, write_prediction, ExperimentConfig};
use std::path::PathBuf;

/// Cluster statistics of collisional particle systems.
///
/// The replica worker pool size can be set with CLUSTERKIN_WORKERS.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate closed-form predictions on a kinetic-time grid.
    Predict {
        /// Comma-separated kinetic times.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        t_grid: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        k_max: usize,
        /// Output directory for distribution.csv and summary.csv.
        #[arg(long, default_value = "prediction")]
        out: PathBuf,
    },
    /// Run a replica ensemble described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare a finished run directory with the predictions.
    Analyze {
        #[arg(long)]
        run: PathBuf,
    },
    /// Run the combinatorial, quadrature and conjugate-point oracles.
    Selfcheck,
}

fn main() -> Result<()> {
    execute(Cli::parse())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Predict { t_grid, k_max, out } => {
            let table = cmd_predict(&t_grid, k_max)?;
            write_prediction(&table, &out)?;
            for s in &table.summary {
                println!(
                    "t={} Z={} F={} F_inf={} gamma={} [{}]",
                    s.t,
                    fmt(s.z),
                    fmt(s.total_mass),
                    fmt(s.giant_mass),
                    fmt(s.gamma),
                    s.status
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let dir = cmd_run(&cfg)?;
            println!("{}", dir.display());
        }
        Command::Analyze { run } => {
            let report = cmd_analyze(&run)?;
            println!("{} replicas, N = {}{}", report.replicas_used, report.particles, if report.partial { " (partial)" } else { "" });
            if let Some(c) = &report.calibration {
                println!("mean free time {:.6} ± {:.6}", c.mean_free_time, c.mean_free_time_se);
            }
            for (fit, giant) in report.fits.iter().zip(&report.giant) {
                println!(
                    "t={} exponent={} damping={} (closed form {}) largest={:.4} (giant {:.4})",
                    fit.t,
                    fmt(fit.exponent),
                    fmt(fit.damping_rate),
                    fmt(fit.damping_pred),
                    giant.largest_fraction_mean,
                    giant.giant_pred
                );
            }
            if !report.aggregate_consistent {
                bail!("aggregate.csv does not match the replica distributions");
            }
        }
        Command::Selfcheck => {
            let results = selfcheck();
            let failed = results.iter().filter(|r| !r.passed).count();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", results.len());
            }
        }
    }
    Ok(())
}

fn fmt(value: Option<f64>) -> String {
    value.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn cli(args: &[&str]) -> Result<()> {
        execute(Cli::try_parse_from(std::iter::once("clusterkin").chain(args.iter().copied()))?)
    }

    fn path(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn predict_writes_tables() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("pred");
        cli(&["predict", "--t-grid", "1,2", "--k-max", "5", "--out", path(&out)]).unwrap();
        let rows = std::fs::read_to_string(out.join("distribution.csv")).unwrap();
        let first: Vec<&str> = rows.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[..2], ["1.0", "1"]);
        let f: f64 = first[2].parse().unwrap();
        assert!((f - (-1.0f64).exp()).abs() < 1e-15);
        let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
        let t2: Vec<&str> = summary.lines().nth(2).unwrap().split(',').collect();
        let giant: f64 = t2[5].parse().unwrap();
        assert!((giant - 0.79681).abs() < 1e-5);
    }

    #[test]
    fn rejects_missing_grid() {
        assert!(Cli::try_parse_from(["clusterkin", "predict"]).is_err());
        assert!(Cli::try_parse_from(["clusterkin", "run"]).is_err());
    }

    fn write_config(dir: &Path, name: &str) -> std::path::PathBuf {
        let file = dir.join(format!("{name}.json"));
        let text = format!(
            r#"{{"engine":"dsmc","dsmc":{{"n":5000}},"time_grid":[0.5,1.0,1.5],"replicas":3,"master_seed":42,"output_dir":"{name}","analysis":{{"fit_k_min":2,"fit_k_max":40,"min_tail_count":50,"bin_ratio":1.25}}}}"#
        );
        std::fs::write(&file, text).unwrap();
        file
    }

    // the only test touching the worker-pool variable
    #[test]
    fn run_and_analyze_are_reproducible_across_pool_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let one = write_config(dir.path(), "one");
        let four = write_config(dir.path(), "four");
        std::env::set_var(clusterkin::experiments::WORKERS_ENV, "1");
        cli(&["run", "--config", path(&one)]).unwrap();
        std::env::set_var(clusterkin::experiments::WORKERS_ENV, "4");
        cli(&["run", "--config", path(&four)]).unwrap();
        std::env::set_var(clusterkin::experiments::WORKERS_ENV, "zero");
        assert!(cli(&["run", "--config", path(&one)]).is_err());
        std::env::remove_var(clusterkin::experiments::WORKERS_ENV);
        for run in ["one", "four"] {
            cli(&["analyze", "--run", path(&dir.path().join(run))]).unwrap();
        }
        for file in ["aggregate.csv", "comparison.csv", "fits.csv", "giant.csv", "report.json", "replica_0001/log.jsonl"] {
            let a = std::fs::read(dir.path().join("one").join(file)).unwrap();
            let b = std::fs::read(dir.path().join("four").join(file)).unwrap();
            assert_eq!(a, b, "{file}");
        }
        let header = std::fs::read_to_string(dir.path().join("one/comparison.csv")).unwrap();
        assert!(header.starts_with("t,k,n_mean,n_se,f_emp,f_pred,g_emp,g_pred,z\n"));
    }

    #[test]
    fn selfcheck_passes() {
        cli(&["selfcheck"]).unwrap();
    }
}
