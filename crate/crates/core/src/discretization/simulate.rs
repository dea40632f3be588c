use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::liegroup::{Pose, Twist};

use super::dynamics::{split_fields, LoadInputs, RodDynamics, RodState, NODE_DOF};
use super::integrator::{Integrator, OdeSystem, SolverConfig};

/// Hz
pub const DEFAULT_OUTPUT_RATE: f64 = 100.0;

/// Time-varying tendon tension and tip force.
pub trait InputSignal: Sync {
    /// Inputs in force at `t` inside the integration segment that starts at
    /// `segment_start`. Sampled signals latch on `segment_start`.
    fn inputs_at(&self, segment_start: f64, t: f64) -> LoadInputs;

    /// Times in `(t0, t1)` where the signal may jump; integration segments
    /// are split there.
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }
}

impl InputSignal for LoadInputs {
    fn inputs_at(&self, _segment_start: f64, _t: f64) -> LoadInputs {
        *self
    }
}

/// Smooth signal evaluated at every stage time.
pub struct ContinuousInputs<F>(pub F);

impl<F: Fn(f64) -> LoadInputs + Sync> InputSignal for ContinuousInputs<F> {
    fn inputs_at(&self, _segment_start: f64, t: f64) -> LoadInputs {
        (self.0)(t)
    }
}

/// Zero-order hold over time-stamped samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampledInputs {
    times: Vec<f64>,
    values: Vec<LoadInputs>,
}

impl SampledInputs {
    pub fn new(times: Vec<f64>, values: Vec<LoadInputs>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::Stream("input samples need matching, non-empty time and value lists".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Stream("input sample times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[LoadInputs] {
        &self.values
    }

    /// Most recent sample at or before `t`; the first sample before the stream starts.
    pub fn latest(&self, t: f64) -> LoadInputs {
        let k = self.times.partition_point(|&s| s <= t + time_tolerance(t));
        self.values[k.saturating_sub(1)]
    }
}

impl InputSignal for SampledInputs {
    fn inputs_at(&self, segment_start: f64, _t: f64) -> LoadInputs {
        self.latest(segment_start)
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.times.iter().copied().filter(|&s| s > t0 && s < t1).collect()
    }
}

pub(crate) fn time_tolerance(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

/// One output sample of a rod trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub poses: Vec<Pose>,
    pub strain: Vec<Twist>,
    pub velocity: Vec<Twist>,
}

impl TrajectorySample {
    pub fn from_state(state: &RodState, poses: Vec<Pose>) -> Self {
        Self {
            t: state.t,
            poses,
            strain: state.strain.clone(),
            velocity: state.velocity.clone(),
        }
    }

    pub fn state(&self) -> RodState {
        RodState {
            t: self.t,
            strain: self.strain.clone(),
            velocity: self.velocity.clone(),
        }
    }

    pub fn tip_pose(&self) -> &Pose {
        self.poses.last().expect("non-empty sample")
    }

    pub fn tip_twist(&self) -> &Twist {
        self.velocity.last().expect("non-empty sample")
    }
}

/// Uniformly sampled trajectory of every node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub arc_lengths: Vec<f64>,
    pub samples: Vec<TrajectorySample>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.arc_lengths.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }

    /// Sample whose timestamp is within tolerance of `t`.
    pub fn at_time(&self, t: f64) -> Option<&TrajectorySample> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.samples.iter().find(|s| (s.t - t).abs() <= tol)
    }
}

/// Output timestamps `t0 + k / rate` up to and including `t0 + horizon`.
pub fn output_times(t0: f64, horizon: f64, rate: f64) -> Result<Vec<f64>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter {
            key: "horizon".into(),
            reason: format!("must be > 0, got {horizon}"),
        });
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidParameter {
            key: "output_rate".into(),
            reason: format!("must be > 0, got {rate}"),
        });
    }
    let count = (horizon * rate + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| t0 + k as f64 / rate).collect())
}

/// Merges output times and breakpoints into segment boundaries, flagging
/// the ones that produce an output sample. The first entry is the start time.
pub(crate) fn segment_schedule(outputs: &[f64], breakpoints: &[f64]) -> Vec<(f64, bool)> {
    let mut all: Vec<(f64, bool)> = outputs
        .iter()
        .map(|&t| (t, true))
        .chain(breakpoints.iter().map(|&t| (t, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut merged: Vec<(f64, bool)> = Vec::with_capacity(all.len());
    for (t, out) in all {
        match merged.last_mut() {
            Some(last) if (t - last.0).abs() <= time_tolerance(t) => last.1 |= out,
            _ => merged.push((t, out)),
        }
    }
    merged
}

/// Integrates segment by segment, building a fresh system at each segment start.
pub(crate) fn drive<S, M, R>(
    y: &mut DVector<f64>,
    schedule: &[(f64, bool)],
    integrator: &mut Integrator,
    mut system_for: M,
    mut record: R,
) -> Result<()>
where
    S: OdeSystem,
    M: FnMut(f64) -> Result<S>,
    R: FnMut(f64, &DVector<f64>) -> Result<()>,
{
    let Some(&(t0, out0)) = schedule.first() else {
        return Ok(());
    };
    if out0 {
        record(t0, y)?;
    }
    for pair in schedule.windows(2) {
        let ((a, _), (b, out)) = (pair[0], pair[1]);
        let system = system_for(a)?;
        integrator.advance(&system, a, y, b)?;
        // base velocity is imposed strongly
        y.fixed_rows_mut::<6>(6).fill(0.0);
        if out {
            record(b, y)?;
        }
    }
    Ok(())
}

/// Forward model with inputs from a signal.
pub struct ForwardSystem<'a, I: ?Sized> {
    pub dynamics: &'a RodDynamics<'a>,
    pub inputs: &'a I,
    pub segment_start: f64,
}

impl<I: InputSignal + ?Sized> OdeSystem for ForwardSystem<'_, I> {
    fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    fn rhs(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) -> Result<()> {
        let (strain, velocity) = split_fields(y.as_slice());
        let inputs = self.inputs.inputs_at(self.segment_start, t);
        let rates = self.dynamics.rates(&strain, &velocity, &inputs)?;
        RodDynamics::write_flat(&rates, dy);
        Ok(())
    }
}

pub(crate) fn sample_from_vector(dynamics: &RodDynamics, t: f64, y: &DVector<f64>) -> TrajectorySample {
    let state = RodState::from_vector(t, y);
    let poses = dynamics.poses(&state.strain);
    TrajectorySample::from_state(&state, poses)
}

fn check_initial(dynamics: &RodDynamics, initial: &RodState) -> Result<()> {
    if initial.nodes() != dynamics.grid.nodes() || initial.velocity.len() != initial.nodes() {
        return Err(Error::InvalidParameter {
            key: "initial_state".into(),
            reason: format!("expected {} nodes, got {}", dynamics.grid.nodes(), initial.nodes()),
        });
    }
    if !initial.is_finite() {
        return Err(Error::NonFinite(initial.t));
    }
    Ok(())
}

/// Runs the forward model from `initial` over `horizon` seconds, recording
/// every node at `output_rate`.
pub fn simulate<I: InputSignal + ?Sized>(
    dynamics: &RodDynamics,
    initial: &RodState,
    inputs: &I,
    horizon: f64,
    output_rate: f64,
    solver: &SolverConfig,
) -> Result<TrajectoryRecord> {
    check_initial(dynamics, initial)?;
    let t0 = initial.t;
    let outputs = output_times(t0, horizon, output_rate)?;
    let end = *outputs.last().expect("at least one output");
    let schedule = segment_schedule(&outputs, &inputs.breakpoints(t0, end));
    let mut integrator = Integrator::new(*solver)?;
    let mut y = initial.to_vector();
    y.fixed_rows_mut::<6>(6).fill(0.0);
    let mut record = TrajectoryRecord {
        arc_lengths: dynamics.grid.arc_lengths(),
        samples: Vec::with_capacity(outputs.len()),
    };
    drive(
        &mut y,
        &schedule,
        &mut integrator,
        |start| {
            Ok(ForwardSystem {
                dynamics,
                inputs,
                segment_start: start,
            })
        },
        |t, y| {
            record.samples.push(sample_from_vector(dynamics, t, y));
            Ok(())
        },
    )?;
    Ok(record)
}

/// Advances one state by `dt` with inputs held fixed.
pub fn step(
    dynamics: &RodDynamics,
    state: &RodState,
    inputs: &LoadInputs,
    dt: f64,
    solver: &SolverConfig,
) -> Result<RodState> {
    check_initial(dynamics, state)?;
    let mut integrator = Integrator::new(*solver)?;
    let mut y = state.to_vector();
    let system = ForwardSystem {
        dynamics,
        inputs,
        segment_start: state.t,
    };
    integrator.advance(&system, state.t, &mut y, state.t + dt)?;
    y.fixed_rows_mut::<6>(6).fill(0.0);
    debug_assert_eq!(y.len() % NODE_DOF, 0);
    Ok(RodState::from_vector(state.t + dt, &y))
}
