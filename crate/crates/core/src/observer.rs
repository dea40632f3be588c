//! Boundary observer: the forward rod model driven by the same inputs, with
//! a PD correction on the tip pose and twist injected as the tip boundary wrench.

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::discretization::dynamics::{split_fields, FieldRates, LoadInputs, RodDynamics, RodState};
use crate::discretization::integrator::{Integrator, OdeSystem, SolverConfig};
use crate::discretization::simulate::{
    drive, output_times, sample_from_vector, segment_schedule, time_tolerance, InputSignal, TrajectoryRecord,
    DEFAULT_OUTPUT_RATE,
};
use crate::error::{Error, Result};
use crate::liegroup::{
    pose_error, quaternion_from_rotation, rotation_from_quaternion, Mat3, Mat6, Pose, PoseErrorKind, Twist, Vec3,
};
use crate::rod_model::tip_load_wrench;

pub const DEFAULT_GAIN: f64 = 0.05;
/// s
pub const DEFAULT_MAX_STALENESS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "GainSpec", into = "GainSpec")]
pub struct ObserverGains {
    pub proportional: Mat6,
    pub derivative: Mat6,
}

/// A gain matrix as written in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainMatrix {
    /// `g I`
    Scalar(f64),
    Diagonal([f64; 6]),
    /// Row-major.
    Full([[f64; 6]; 6]),
}

impl GainMatrix {
    pub fn to_matrix(&self) -> Mat6 {
        match self {
            GainMatrix::Scalar(g) => Mat6::identity() * *g,
            GainMatrix::Diagonal(d) => Mat6::from_diagonal(&Twist::from(*d)),
            GainMatrix::Full(rows) => Mat6::from_fn(|i, j| rows[i][j]),
        }
    }

    pub fn from_matrix(m: &Mat6) -> Self {
        let d = m.diagonal();
        if *m == Mat6::from_diagonal(&d) {
            if d.iter().all(|v| *v == d[0]) {
                GainMatrix::Scalar(d[0])
            } else {
                GainMatrix::Diagonal(d.into())
            }
        } else {
            GainMatrix::Full(std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])))
        }
    }
}

/// Gains as written in configuration files: one value for both terms or
/// separate proportional and derivative entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Both(GainMatrix),
    Split {
        proportional: GainMatrix,
        derivative: GainMatrix,
    },
}

impl From<GainSpec> for ObserverGains {
    fn from(spec: GainSpec) -> Self {
        match spec {
            GainSpec::Both(g) => Self {
                proportional: g.to_matrix(),
                derivative: g.to_matrix(),
            },
            GainSpec::Split {
                proportional,
                derivative,
            } => Self {
                proportional: proportional.to_matrix(),
                derivative: derivative.to_matrix(),
            },
        }
    }
}

impl From<ObserverGains> for GainSpec {
    fn from(g: ObserverGains) -> Self {
        if g.proportional == g.derivative {
            GainSpec::Both(GainMatrix::from_matrix(&g.proportional))
        } else {
            GainSpec::Split {
                proportional: GainMatrix::from_matrix(&g.proportional),
                derivative: GainMatrix::from_matrix(&g.derivative),
            }
        }
    }
}

impl Default for ObserverGains {
    fn default() -> Self {
        Self::scalar(DEFAULT_GAIN)
    }
}

impl ObserverGains {
    /// `gain * I` for both terms.
    pub fn scalar(gain: f64) -> Self {
        Self::scalars(gain, gain)
    }

    pub fn scalars(proportional: f64, derivative: f64) -> Self {
        Self {
            proportional: Mat6::identity() * proportional,
            derivative: Mat6::identity() * derivative,
        }
    }

    pub fn zero() -> Self {
        Self::scalar(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.proportional == Mat6::zeros() && self.derivative == Mat6::zeros()
    }

    /// Both gains must be symmetric positive semidefinite.
    pub fn validate(&self) -> Result<()> {
        for (key, m) in [("gains.proportional", &self.proportional), ("gains.derivative", &self.derivative)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    key: key.into(),
                    reason: "non-finite entry".into(),
                });
            }
            let scale = m.amax().max(f64::MIN_POSITIVE);
            if (m - m.transpose()).amax() > 1e-12 * scale {
                return Err(Error::InvalidParameter {
                    key: key.into(),
                    reason: "must be symmetric".into(),
                });
            }
            let min = SymmetricEigen::new(*m).eigenvalues.min();
            if min < -1e-12 * scale {
                return Err(Error::InvalidParameter {
                    key: key.into(),
                    reason: format!("must be positive semidefinite (eigenvalue {min:e})"),
                });
            }
        }
        Ok(())
    }
}

/// Tip pose and body-frame twist measured at time `t`.
///
/// The orientation also keeps the quaternion it was read from or will be
/// written as, so files round-trip without touching the rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipMeasurement {
    pub t: f64,
    pub pose: Pose,
    pub twist: Twist,
    quaternion: [f64; 4],
}

impl TipMeasurement {
    pub fn new(t: f64, pose: Pose, twist: Twist) -> Self {
        Self {
            t,
            pose,
            twist,
            quaternion: quaternion_from_rotation(&pose.rotation),
        }
    }

    /// Measurement with the orientation given as a quaternion `(w, x, y, z)`.
    pub fn from_wire(t: f64, quaternion: [f64; 4], position: Vec3, twist: Twist) -> Self {
        Self {
            t,
            pose: Pose::new(rotation_from_quaternion(quaternion), position),
            twist,
            quaternion,
        }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.quaternion
    }
}

/// Time-sorted tip measurements, latched with a zero-order hold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementStream {
    samples: Vec<TipMeasurement>,
}

impl MeasurementStream {
    pub fn new(samples: Vec<TipMeasurement>) -> Result<Self> {
        if let Some(k) = samples.windows(2).position(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Stream(format!(
                "timestamps must be strictly increasing (row {} at t = {})",
                k + 1,
                samples[k + 1].t
            )));
        }
        if let Some(m) = samples
            .iter()
            .find(|m| !m.t.is_finite() || m.pose.orthonormality_defect() > 1e-6 || m.twist.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Stream(format!("invalid measurement at t = {}", m.t)));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TipMeasurement] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|m| m.t).collect()
    }

    /// Most recent measurement at or before `t`.
    pub fn latest(&self, t: f64) -> Option<&TipMeasurement> {
        let k = self.samples.partition_point(|m| m.t <= t + time_tolerance(t));
        k.checked_sub(1).map(|k| &self.samples[k])
    }

    /// Like [`latest`](Self::latest) but fails when no sample is recent enough.
    pub fn latched(&self, t: f64, max_staleness: f64) -> Result<&TipMeasurement> {
        let m = self
            .latest(t)
            .ok_or_else(|| Error::Stream(format!("no measurement at or before t = {t}")))?;
        let age = t - m.t;
        if age > max_staleness + time_tolerance(t) {
            return Err(Error::StaleMeasurement {
                t,
                age,
                limit: max_staleness,
            });
        }
        Ok(m)
    }
}

/// Estimated fields plus the poses reconstructed from the estimated strain.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub rod: RodState,
    pub poses: Vec<Pose>,
}

impl ObserverState {
    pub fn new(dynamics: &RodDynamics, rod: RodState) -> Self {
        let poses = dynamics.poses(&rod.strain);
        Self { rod, poses }
    }

    /// Straight, motionless initial estimate.
    pub fn straight(dynamics: &RodDynamics) -> Self {
        Self::new(dynamics, RodState::straight(&dynamics.grid, &dynamics.model.reference_strain))
    }

    pub fn tip_pose(&self) -> &Pose {
        self.poses.last().expect("non-empty state")
    }

    pub fn tip_twist(&self) -> &Twist {
        self.rod.velocity.last().expect("non-empty state")
    }
}

/// Tip boundary wrench `-P err - D (eta_hat - eta) + (0, R^T F)`, with the
/// load rotated by `load_rotation`.
pub fn tip_boundary_wrench(
    estimated_pose: &Pose,
    estimated_twist: &Twist,
    measurement: &TipMeasurement,
    tip_force: &Vec3,
    load_rotation: &Mat3,
    gains: &ObserverGains,
    kind: PoseErrorKind,
) -> Result<Twist> {
    let err = pose_error(kind, estimated_pose, &measurement.pose)?;
    let twist_error = estimated_twist - measurement.twist;
    let correction = Twist::zeros() + gains.proportional * err + gains.derivative * twist_error;
    Ok(tip_load_wrench(load_rotation, tip_force) - correction)
}

/// Tip boundary wrench with the load expressed through the estimated tip rotation.
pub fn correction_wrench(
    estimated_pose: &Pose,
    estimated_twist: &Twist,
    measurement: &TipMeasurement,
    tip_force: &Vec3,
    gains: &ObserverGains,
    kind: PoseErrorKind,
) -> Result<Twist> {
    tip_boundary_wrench(
        estimated_pose,
        estimated_twist,
        measurement,
        tip_force,
        &estimated_pose.rotation,
        gains,
        kind,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverConfig {
    pub gains: ObserverGains,
    pub error_kind: PoseErrorKind,
    /// s
    pub max_staleness: f64,
    /// Rotate the tip load with the measured rather than the estimated tip rotation.
    pub measured_rotation_load: bool,
    /// Hz
    pub output_rate: f64,
    /// Semi-implicit by default: without material damping the estimate
    /// carries an undamped shear-rotation mode near 1.4e6 rad/s that
    /// adaptive error control would have to resolve.
    pub solver: SolverConfig,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            gains: ObserverGains::default(),
            error_kind: PoseErrorKind::Skew,
            max_staleness: DEFAULT_MAX_STALENESS,
            measured_rotation_load: false,
            output_rate: DEFAULT_OUTPUT_RATE,
            solver: SolverConfig::semi_implicit(),
        }
    }
}

impl ObserverConfig {
    pub fn with_gains(mut self, gains: ObserverGains) -> Self {
        self.gains = gains;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        self.solver.validate()?;
        if !(self.max_staleness > 0.0) {
            return Err(Error::InvalidParameter {
                key: "observer.max_staleness".into(),
                reason: format!("must be > 0, got {}", self.max_staleness),
            });
        }
        if !(self.output_rate.is_finite() && self.output_rate > 0.0) {
            return Err(Error::InvalidParameter {
                key: "output_rate".into(),
                reason: format!("must be > 0, got {}", self.output_rate),
            });
        }
        Ok(())
    }
}

/// Observer time derivatives for the estimated fields.
pub fn observer_rhs(
    dynamics: &RodDynamics,
    strain: &[Twist],
    velocity: &[Twist],
    inputs: &LoadInputs,
    measurement: &TipMeasurement,
    config: &ObserverConfig,
) -> Result<FieldRates> {
    dynamics.rates_with_tip(strain, velocity, inputs.tension, |tip_pose, tip_twist| {
        let load_rotation = if config.measured_rotation_load {
            &measurement.pose.rotation
        } else {
            &tip_pose.rotation
        };
        tip_boundary_wrench(
            tip_pose,
            tip_twist,
            measurement,
            &inputs.tip_force,
            load_rotation,
            &config.gains,
            config.error_kind,
        )
    })
}

struct ObserverSystem<'a, I: ?Sized> {
    dynamics: &'a RodDynamics<'a>,
    inputs: &'a I,
    measurement: TipMeasurement,
    config: &'a ObserverConfig,
    segment_start: f64,
}

impl<I: InputSignal + ?Sized> OdeSystem for ObserverSystem<'_, I> {
    fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    fn rhs(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) -> Result<()> {
        let (strain, velocity) = split_fields(y.as_slice());
        let inputs = self.inputs.inputs_at(self.segment_start, t);
        let rates = observer_rhs(self.dynamics, &strain, &velocity, &inputs, &self.measurement, self.config)?;
        RodDynamics::write_flat(&rates, dy);
        Ok(())
    }
}

/// Estimate trajectory with the tip boundary wrench applied at each output time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObserverRun {
    pub record: TrajectoryRecord,
    pub tip_wrench: Vec<Twist>,
}

/// Replays `measurements` through the observer from `init` over `horizon`.
pub fn run_observer<I: InputSignal + ?Sized>(
    dynamics: &RodDynamics,
    init: &ObserverState,
    inputs: &I,
    measurements: &MeasurementStream,
    horizon: f64,
    config: &ObserverConfig,
) -> Result<ObserverRun> {
    config.validate()?;
    if init.rod.nodes() != dynamics.grid.nodes() {
        return Err(Error::InvalidParameter {
            key: "initial_state".into(),
            reason: format!("expected {} nodes, got {}", dynamics.grid.nodes(), init.rod.nodes()),
        });
    }
    let t0 = init.rod.t;
    let outputs = output_times(t0, horizon, config.output_rate)?;
    let end = *outputs.last().expect("at least one output");
    let mut breaks = inputs.breakpoints(t0, end);
    breaks.extend(measurements.times().into_iter().filter(|&t| t > t0 && t < end));
    let schedule = segment_schedule(&outputs, &breaks);

    let mut integrator = Integrator::new(config.solver)?;
    let mut y = init.rod.to_vector();
    y.fixed_rows_mut::<6>(6).fill(0.0);
    let mut run = ObserverRun {
        record: TrajectoryRecord {
            arc_lengths: dynamics.grid.arc_lengths(),
            samples: Vec::with_capacity(outputs.len()),
        },
        tip_wrench: Vec::with_capacity(outputs.len()),
    };
    drive(
        &mut y,
        &schedule,
        &mut integrator,
        |start| {
            Ok(ObserverSystem {
                dynamics,
                inputs,
                measurement: *measurements.latched(start, config.max_staleness)?,
                config,
                segment_start: start,
            })
        },
        |t, y| {
            let sample = sample_from_vector(dynamics, t, y);
            let wrench = match measurements.latched(t, config.max_staleness) {
                Ok(m) => {
                    let load_rotation = if config.measured_rotation_load {
                        m.pose.rotation
                    } else {
                        sample.tip_pose().rotation
                    };
                    tip_boundary_wrench(
                        sample.tip_pose(),
                        sample.tip_twist(),
                        m,
                        &inputs.inputs_at(t, t).tip_force,
                        &load_rotation,
                        &config.gains,
                        config.error_kind,
                    )?
                }
                Err(_) => Twist::repeat(f64::NAN),
            };
            run.tip_wrench.push(wrench);
            run.record.samples.push(sample);
            Ok(())
        },
    )?;
    Ok(run)
}
