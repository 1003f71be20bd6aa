use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otcp::bench::{export_contours, fit_cell, run_benchmark, sweep, sweep_csv, BenchConfig, SWEEP_EPSILONS, SWEEP_TARGETS};
use otcp::conformal::{CalibratedPredictor, ScoreKind};
use otcp::data_io::{synth_dataset_with_features, write_dataset_csv, SynthKind};

#[derive(Parser)]
#[command(name = "otcp", version, about = "Multivariate conformal prediction with optimal-transport ranks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark runs and hyperparameter sweeps
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Fit and calibrate one method, saving the predictor as JSON
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "otcp")]
        method: ScoreKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export 2-d region outlines of a saved predictor
    Contour {
        #[arg(long)]
        model: PathBuf,
        /// Feature vector, comma separated; repeat for several points
        #[arg(long = "x", required = true)]
        xs: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.1])]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        n_angles: usize,
        #[arg(long, default_value = "contours")]
        out: PathBuf,
    },
    /// Write a synthetic dataset as CSV
    Synth {
        #[arg(long, default_value = "gaussian")]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchAction {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_vec(s: &str) -> otcp::Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| otcp::Error::Param(format!("not a number: {t:?}")))
        })
        .collect()
}

fn out_dir(cfg: &BenchConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("bench_out"))
}

fn run(cli: Cli) -> otcp::Result<ExitCode> {
    match cli.command {
        Command::Bench { action } => match action {
            BenchAction::Run { config, out } => {
                let cfg = BenchConfig::load_json(&config)?;
                let report = run_benchmark(&cfg)?;
                for f in report.write(out_dir(&cfg, out))? {
                    println!("wrote {}", f.display());
                }
                for s in &report.summary {
                    println!(
                        "{:<18} coverage {:.4} ± {:.4}  size {:.4e} ± {:.2e}  ({} ok, {} failed)",
                        s.method.name(),
                        s.coverage_mean,
                        s.coverage_se,
                        s.size_mean,
                        s.size_se,
                        s.n_ok,
                        s.n_failed
                    );
                }
                Ok(if report.has_failures() { ExitCode::from(2) } else { ExitCode::SUCCESS })
            }
            BenchAction::Sweep { config, eps, targets, out } => {
                let cfg = BenchConfig::load_json(&config)?;
                let eps = if eps.is_empty() { SWEEP_EPSILONS.to_vec() } else { eps };
                let targets = if targets.is_empty() { SWEEP_TARGETS.to_vec() } else { targets };
                let report = sweep(&cfg, &eps, &targets)?;
                let dir = out_dir(&cfg, out);
                report.write(&dir)?;
                let path = dir.join("sweep.csv");
                std::fs::write(&path, sweep_csv(&report))?;
                println!("wrote {}", path.display());
                Ok(if report.has_failures() { ExitCode::from(2) } else { ExitCode::SUCCESS })
            }
        },
        Command::Fit { config, method, seed, out } => {
            let cfg = BenchConfig::load_json(&config)?;
            let cell = fit_cell(&cfg, method, seed)?;
            cell.predictor.save_json(&out)?;
            println!(
                "{} threshold {:?} from {} calibration points -> {}",
                method,
                cell.predictor.threshold,
                cell.predictor.n_cal,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Contour { model, xs, alphas, n_angles, out } => {
            let pred = CalibratedPredictor::load_json(&model)?;
            let xs: Vec<Vec<f64>> = xs.iter().map(|s| parse_vec(s)).collect::<otcp::Result<_>>()?;
            for f in export_contours(&pred, &xs, &alphas, n_angles, &out)? {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { kind, n, d, p, seed, out } => {
            let kind = match kind.as_str() {
                "gaussian" => SynthKind::gaussian_identity(),
                "banana" => SynthKind::banana(),
                other => {
                    return Err(otcp::Error::Param(format!(
                        "unknown synthetic kind {other:?} (gaussian, banana; mixtures via a bench config)"
                    )))
                }
            };
            let ds = synth_dataset_with_features(&kind, n, d, p, seed)?;
            write_dataset_csv(&ds, &out)?;
            println!("wrote {} rows to {}", ds.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
