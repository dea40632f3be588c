use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cosserat_core::cli_io::{self, ESTIMATE_FILE, MEASUREMENTS_FILE, METRICS_FILE, SWEEP_FILE, TRUTH_FILE};
use cosserat_core::discretization::TrajectoryRecord;
use cosserat_core::harness::{self, compute_metrics, ExperimentConfig, Metrics, RunReport};
use cosserat_core::liegroup::PoseErrorKind;
use cosserat_core::observer::ObserverGains;
use cosserat_core::{Error, Result};

/// Cosserat rod twin simulations and tip-measurement state estimation.
#[derive(Parser)]
#[command(name = "cosserat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the ground-truth rod and record noisy tip measurements.
    Simulate {
        /// Experiment config (TOML); defaults apply when omitted.
        #[arg(id = "config_file", value_name = "CONFIG")]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the observer on a measurement file.
    Estimate {
        /// `[CONFIG] MEASUREMENTS`: the config may also come from `--config`.
        #[arg(value_name = "PATH", num_args = 1..=2, required = true)]
        paths: Vec<PathBuf>,
        /// Ground-truth trajectory for metrics; `truth.csv` next to the
        /// measurements is used when present.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare an estimated trajectory against a ground truth.
    Evaluate {
        estimate: PathBuf,
        truth: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run observers over the gains and grid sizes of the `sweep` section against one truth.
    Sweep {
        #[arg(id = "config_file", value_name = "CONFIG")]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML), alternative to the positional argument.
    #[arg(long = "config", value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed time step in seconds for both the truth and the observer.
    #[arg(long, value_name = "DT")]
    fixed_step: Option<f64>,
    /// Tip pose-error map.
    #[arg(long = "err", value_enum)]
    error: Option<ErrorMap>,
    /// Scalar gain applied to both gain matrices, or a TOML file with a `gains` entry.
    #[arg(long, value_name = "SCALAR|PATH", allow_hyphen_values = true)]
    gains: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorMap {
    Skew,
    Log,
}

impl From<ErrorMap> for PoseErrorKind {
    fn from(e: ErrorMap) -> Self {
        match e {
            ErrorMap::Skew => PoseErrorKind::Skew,
            ErrorMap::Log => PoseErrorKind::Log,
        }
    }
}

impl Common {
    fn resolve(&self, positional: Option<&Path>) -> Result<ExperimentConfig> {
        let path = match (positional, self.config.as_deref()) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "two configs given: {} and {}",
                    a.display(),
                    b.display()
                )))
            }
            (a, b) => a.or(b),
        };
        let mut config = match path {
            Some(p) => cli_io::load_config(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dt) = self.fixed_step {
            config = config.with_fixed_step(dt);
        }
        if let Some(e) = self.error {
            config.observer.error = e.into();
        }
        if let Some(g) = &self.gains {
            config.observer.gains = parse_gains(g)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(&self.out_dir)
    }
}

fn parse_gains(arg: &str) -> Result<ObserverGains> {
    match arg.parse::<f64>() {
        Ok(g) => {
            let gains = ObserverGains::scalar(g);
            gains.validate()?;
            Ok(gains)
        }
        Err(_) => cli_io::load_gains(Path::new(arg)),
    }
}

fn report(label: &str, m: &Metrics) {
    let convergence = match m.convergence.time() {
        Some(t) => format!("{t:.4} s"),
        None => "none".into(),
    };
    println!(
        "{label}: convergence {convergence}, tip RMSE theta {:.3e} rad, x {:.3e} m, y {:.3e} m, position {:.3e} m, final pose error {:.3e}",
        m.rmse.theta, m.rmse.x, m.rmse.y, m.rmse.position, m.final_pose_error
    );
}

fn simulate(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    cli_io::write_resolved_config(config, dir)?;
    let twin = harness::generate_twin_truth(config)?;
    cli_io::write_trajectory(&dir.join(TRUTH_FILE), &twin.truth)?;
    cli_io::write_measurements(&dir.join(MEASUREMENTS_FILE), &twin.measurements, &twin.inputs)?;
    println!(
        "wrote {} samples of {} nodes to {}",
        twin.truth.len(),
        twin.truth.nodes(),
        dir.display()
    );
    Ok(())
}

fn estimate(config: &ExperimentConfig, dir: &Path, measurements: &Path, truth: Option<PathBuf>) -> Result<()> {
    let truth_path = truth.or_else(|| {
        let sibling = measurements.parent().unwrap_or(Path::new(".")).join(TRUTH_FILE);
        sibling.is_file().then_some(sibling)
    });
    let (stream, tension) = cli_io::load_measurements(measurements)?;
    let inputs = tension.with_tip_force(config.loads.tip_force())?;
    let truth = truth_path.as_deref().map(cli_io::load_trajectory).transpose()?;
    cli_io::write_resolved_config(config, dir)?;
    let (run, metrics) = harness::run_estimate(config, &stream, &inputs, truth.as_ref())?;
    let out = dir.join(ESTIMATE_FILE);
    cli_io::write_trajectory(&out, &run.record)?;
    match metrics {
        Some(m) => {
            cli_io::write_json(&dir.join(METRICS_FILE), &m)?;
            report("estimate", &m);
        }
        None => println!("no ground truth, metrics skipped"),
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn evaluate(config: &ExperimentConfig, dir: &Path, estimate: &Path, truth: &Path) -> Result<()> {
    let est = cli_io::load_trajectory(estimate)?;
    let truth: TrajectoryRecord = cli_io::load_trajectory(truth)?;
    let model = config.observer_model()?;
    let metrics = compute_metrics(&est, &truth, &config.metrics, &model.sections)?;
    cli_io::write_json(&dir.join(METRICS_FILE), &metrics)?;
    report("evaluate", &metrics);
    Ok(())
}

fn sweep(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    cli_io::write_resolved_config(config, dir)?;
    let reports: Vec<RunReport> = harness::sweep(config)?;
    cli_io::write_json(&dir.join(SWEEP_FILE), &reports)?;
    for r in &reports {
        report(&r.label, &r.metrics);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, common } => {
            let c = common.resolve(config.as_deref())?;
            simulate(&c, common.out_dir()?)
        }
        Command::Estimate { paths, truth, common } => {
            let (config, measurements) = match paths.as_slice() {
                [m] => (None, m),
                [c, m] => (Some(c.as_path()), m),
                _ => unreachable!("clap bounds the count"),
            };
            let c = common.resolve(config)?;
            estimate(&c, common.out_dir()?, measurements, truth)
        }
        Command::Evaluate { estimate, truth, common } => {
            let c = common.resolve(None)?;
            evaluate(&c, common.out_dir()?, &estimate, &truth)
        }
        Command::Sweep { config, common } => {
            let c = common.resolve(config.as_deref())?;
            sweep(&c, common.out_dir()?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
