//! Twin experiments: perturbed ground truth, noisy measurements, observer
//! runs and the metrics that compare them.

pub mod config;
pub mod metrics;
pub mod oracle;
pub mod twin;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{discrete_equilibrium, Grid, InputSignal, RodDynamics, SampledInputs, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::observer::{run_observer, MeasurementStream, ObserverGains, ObserverRun, ObserverState};

pub use config::{ExperimentConfig, InitMode, NoiseConfig, TensionProfile, TwinConfig};
pub use metrics::{compute_metrics, convergence_time, rmse_after_transient, Convergence, Metrics};
pub use oracle::{static_equilibrium_oracle, StaticSolution};
pub use twin::{generate_twin_truth, TwinData};

/// Initial estimate for the observer according to the configured mode.
/// `truth` is only consulted for exact initialization.
pub fn observer_initial_state(
    config: &ExperimentConfig,
    dynamics: &RodDynamics,
    inputs: &SampledInputs,
    t0: f64,
    truth: Option<&TrajectoryRecord>,
) -> Result<ObserverState> {
    let mut state = match config.observer.init {
        InitMode::Straight => ObserverState::straight(dynamics),
        InitMode::Equilibrium => {
            let rod = discrete_equilibrium(dynamics, &inputs.inputs_at(t0, t0))?;
            ObserverState::new(dynamics, rod)
        }
        InitMode::Truth => {
            let first = truth
                .and_then(|r| r.samples.first())
                .ok_or_else(|| Error::InvalidParameter {
                    key: "observer.init".into(),
                    reason: "exact initialization needs a ground truth".into(),
                })?;
            if first.strain.len() != dynamics.grid.nodes() {
                return Err(Error::InvalidParameter {
                    key: "observer.init".into(),
                    reason: "exact initialization needs the truth's grid".into(),
                });
            }
            ObserverState::new(dynamics, first.state())
        }
    };
    state.rod.t = t0;
    Ok(state)
}

/// Runs the observer of `config` on recorded streams. The run spans the
/// ground truth when one is given, otherwise the measurements; metrics are
/// only available against a ground truth.
pub fn run_estimate(
    config: &ExperimentConfig,
    measurements: &MeasurementStream,
    inputs: &SampledInputs,
    truth: Option<&TrajectoryRecord>,
) -> Result<(ObserverRun, Option<Metrics>)> {
    config.validate()?;
    let (t0, t1) = match truth {
        Some(record) => match (record.samples.first(), record.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => return Err(Error::Misaligned("empty ground truth".into())),
        },
        None => match (measurements.samples().first(), measurements.samples().last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => return Err(Error::Stream("no measurements".into())),
        },
    };
    let model = config.observer_model()?;
    let dynamics = RodDynamics::new(&model, config.grid()?);
    let init = observer_initial_state(config, &dynamics, inputs, t0, truth)?;
    let run = run_observer(&dynamics, &init, inputs, measurements, t1 - t0, &config.observer_config())?;
    let metrics = truth
        .map(|record| compute_metrics(&run.record, record, &config.metrics, &model.sections))
        .transpose()?;
    Ok((run, metrics))
}

/// Runs the observer of `config` on recorded twin data.
pub fn estimate(config: &ExperimentConfig, twin: &TwinData) -> Result<(ObserverRun, Metrics)> {
    let (run, metrics) = run_estimate(config, &twin.measurements, &twin.inputs, Some(&twin.truth))?;
    Ok((run, metrics.expect("metrics against the twin truth")))
}

/// Full twin experiment: truth, measurements, estimate and metrics.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub twin: TwinData,
    pub estimate: ObserverRun,
    pub metrics: Metrics,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let twin = generate_twin_truth(config)?;
    let (estimate, metrics) = self::estimate(config, &twin)?;
    Ok(ExperimentOutcome {
        twin,
        estimate,
        metrics,
    })
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub nodes: usize,
    pub gains: ObserverGains,
    pub metrics: Metrics,
}

/// Runs several labelled experiments in parallel, each with its own truth.
pub fn compare_runs(configs: &[(String, ExperimentConfig)]) -> Result<Vec<RunReport>> {
    configs
        .par_iter()
        .map(|(label, config)| {
            let outcome = run_experiment(config)?;
            Ok(RunReport {
                label: label.clone(),
                nodes: config.grid.nodes,
                gains: config.observer.gains,
                metrics: outcome.metrics,
            })
        })
        .collect()
}

/// Observers with every combination of scalar gain and grid size of the
/// sweep section, all against one shared ground truth.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<RunReport>> {
    let twin = generate_twin_truth(config)?;
    sweep_on(config, &twin)
}

pub fn sweep_on(config: &ExperimentConfig, twin: &TwinData) -> Result<Vec<RunReport>> {
    let gains = if config.sweep.gains.is_empty() {
        vec![None]
    } else {
        config.sweep.gains.iter().map(|g| Some(*g)).collect()
    };
    let nodes = if config.sweep.nodes.is_empty() {
        vec![config.grid.nodes]
    } else {
        config.sweep.nodes.clone()
    };
    let cases: Vec<(Option<f64>, usize)> = nodes
        .iter()
        .flat_map(|n| gains.iter().map(move |g| (*g, *n)))
        .collect();
    cases
        .par_iter()
        .map(|(gain, nodes)| {
            let mut c = config.clone();
            if let Some(g) = gain {
                c.observer.gains = ObserverGains::scalar(*g);
            }
            c.grid.nodes = *nodes;
            Grid::new(*nodes, c.material.length)?;
            let (_, metrics) = estimate(&c, twin)?;
            let label = match gain {
                Some(g) => format!("gain={g} nodes={nodes}"),
                None => format!("nodes={nodes}"),
            };
            Ok(RunReport {
                label,
                nodes: *nodes,
                gains: c.observer.gains,
                metrics,
            })
        })
        .collect()
}
