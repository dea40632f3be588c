use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, InputSignal, IntegratorKind, LoadInputs, SolverConfig};
use crate::error::{Error, Result};
use crate::liegroup::{PoseErrorKind, Vec3};
use crate::observer::{ObserverConfig, ObserverGains, DEFAULT_MAX_STALENESS};
use crate::rod_model::{MaterialGeometry, RodModel, TendonRouting};

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        key: key.into(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be >= 0, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nodes: Grid::DEFAULT_NODES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadsConfig {
    /// m/s^2, spatial frame
    pub gravity: [f64; 3],
    /// kg hanging from the tip
    pub tip_mass: f64,
}

impl Default for LoadsConfig {
    fn default() -> Self {
        Self {
            gravity: [0.0, -9.81, 0.0],
            tip_mass: 0.05,
        }
    }
}

impl LoadsConfig {
    pub fn gravity(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }

    /// N, spatial frame
    pub fn tip_force(&self) -> Vec3 {
        self.tip_mass * self.gravity()
    }
}

/// One smooth change of tendon tension, `amount` N over `duration` s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensionRamp {
    pub start: f64,
    pub duration: f64,
    pub amount: f64,
}

/// Tendon tension as a baseline plus a sum of quintic smoothstep ramps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TensionProfile {
    pub baseline: f64,
    pub ramps: Vec<TensionRamp>,
}

impl Default for TensionProfile {
    fn default() -> Self {
        Self {
            baseline: 0.0,
            ramps: vec![
                TensionRamp {
                    start: 0.5,
                    duration: 1.0,
                    amount: 4.0,
                },
                TensionRamp {
                    start: 2.5,
                    duration: 1.0,
                    amount: 4.0,
                },
            ],
        }
    }
}

fn smootherstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

impl TensionProfile {
    pub fn constant(tension: f64) -> Self {
        Self {
            baseline: tension,
            ramps: Vec::new(),
        }
    }

    /// N
    pub fn at(&self, t: f64) -> f64 {
        self.baseline
            + self
                .ramps
                .iter()
                .map(|r| r.amount * smootherstep((t - r.start) / r.duration))
                .sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.baseline.is_finite() {
            return Err(invalid("tension.baseline", "must be finite"));
        }
        for (i, r) in self.ramps.iter().enumerate() {
            positive(&format!("tension.ramps[{i}].duration"), r.duration)?;
            if !(r.start.is_finite() && r.amount.is_finite()) {
                return Err(invalid(&format!("tension.ramps[{i}]"), "start and amount must be finite"));
            }
        }
        Ok(())
    }
}

/// Smooth tension with a constant spatial tip force.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileInputs {
    pub tension: TensionProfile,
    pub tip_force: Vec3,
}

impl InputSignal for ProfileInputs {
    fn inputs_at(&self, _segment_start: f64, t: f64) -> LoadInputs {
        LoadInputs {
            tension: self.tension.at(t),
            tip_force: self.tip_force,
        }
    }
}

/// Differences between the ground-truth rod and the observer's model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwinConfig {
    pub density_scale: f64,
    /// s, truth damping `D = beta K`
    pub damping_beta: f64,
    /// m^2, cubic bending stiffening of the truth; 0 keeps the law linear
    pub hardening: f64,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            density_scale: 1.05,
            damping_beta: 1e-4,
            hardening: 0.0,
        }
    }
}

impl TwinConfig {
    /// Truth identical to the observer's model.
    pub fn matched() -> Self {
        Self {
            density_scale: 1.0,
            damping_beta: 0.0,
            hardening: 0.0,
        }
    }
}

/// Standard deviations of the measurement noise, per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// m
    pub position: f64,
    /// deg, per axis of a body-frame rotation perturbation
    pub rotation_deg: f64,
    /// rad/s
    pub angular_velocity: f64,
    /// m/s
    pub linear_velocity: f64,
    /// N
    pub tension: f64,
    /// Centered moving-average window on velocity channels; 1 disables it.
    pub velocity_window: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            position: 5e-4,
            rotation_deg: 0.2,
            angular_velocity: 0.02,
            linear_velocity: 0.01,
            tension: 0.02,
            velocity_window: 5,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            position: 0.0,
            rotation_deg: 0.0,
            angular_velocity: 0.0,
            linear_velocity: 0.0,
            tension: 0.0,
            velocity_window: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Straight, motionless rod.
    #[default]
    Straight,
    /// Static equilibrium of the observer's model under the initial inputs.
    Equilibrium,
    /// The exact initial state of the ground truth.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverSettings {
    pub gains: ObserverGains,
    pub error: PoseErrorKind,
    /// s
    pub max_staleness: f64,
    pub measured_rotation_load: bool,
    pub init: InitMode,
    pub solver: SolverConfig,
}

impl Default for ObserverSettings {
    fn default() -> Self {
        Self {
            gains: ObserverGains::default(),
            error: PoseErrorKind::Skew,
            max_staleness: DEFAULT_MAX_STALENESS,
            measured_rotation_load: false,
            init: InitMode::Straight,
            solver: SolverConfig::semi_implicit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// s
    pub pose_transient: f64,
    /// s
    pub velocity_transient: f64,
    /// fraction of the initial tip pose error
    pub convergence_threshold: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            pose_transient: 0.12,
            velocity_transient: 0.2,
            convergence_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Scalar gains applied as `g I` to both terms.
    pub gains: Vec<f64>,
    /// Grid sizes for the observer; empty keeps the configured grid.
    pub nodes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gains: vec![0.005, 0.05, 0.5],
            nodes: Vec::new(),
        }
    }
}

/// Everything needed to reproduce one twin experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub material: MaterialGeometry,
    pub grid: GridConfig,
    /// Ground-truth simulation; the observer has its own.
    pub solver: SolverConfig,
    pub tendon: TendonRouting,
    pub loads: LoadsConfig,
    pub tension: TensionProfile,
    pub twin: TwinConfig,
    pub noise: NoiseConfig,
    pub observer: ObserverSettings,
    pub metrics: MetricsConfig,
    pub sweep: SweepConfig,
    /// Hz, measurement and output sampling
    pub sample_rate: f64,
    /// s
    pub horizon: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            material: MaterialGeometry::calibrated(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            tendon: TendonRouting::default(),
            loads: LoadsConfig::default(),
            tension: TensionProfile::default(),
            twin: TwinConfig::default(),
            noise: NoiseConfig::default(),
            observer: ObserverSettings::default(),
            metrics: MetricsConfig::default(),
            sweep: SweepConfig::default(),
            sample_rate: 100.0,
            horizon: 5.0,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.material.validate().map_err(|e| match e {
            Error::InvalidParameter { key, reason } => Error::InvalidParameter {
                key: format!("material.{key}"),
                reason,
            },
            other => other,
        })?;
        Grid::new(self.grid.nodes, self.material.length)?;
        self.solver.validate()?;
        self.observer.solver.validate().map_err(|e| match e {
            Error::InvalidParameter { key, reason } => Error::InvalidParameter {
                key: format!("observer.{key}"),
                reason,
            },
            other => other,
        })?;
        self.tension.validate()?;
        if self.loads.gravity.iter().any(|g| !g.is_finite()) {
            return Err(invalid("loads.gravity", "must be finite"));
        }
        non_negative("loads.tip_mass", self.loads.tip_mass)?;
        positive("twin.density_scale", self.twin.density_scale)?;
        non_negative("twin.damping_beta", self.twin.damping_beta)?;
        non_negative("twin.hardening", self.twin.hardening)?;
        let n = &self.noise;
        for (key, v) in [
            ("noise.position", n.position),
            ("noise.rotation_deg", n.rotation_deg),
            ("noise.angular_velocity", n.angular_velocity),
            ("noise.linear_velocity", n.linear_velocity),
            ("noise.tension", n.tension),
        ] {
            non_negative(key, v)?;
        }
        if n.velocity_window == 0 {
            return Err(invalid("noise.velocity_window", "must be >= 1"));
        }
        self.observer_config().validate()?;
        let m = &self.metrics;
        non_negative("metrics.pose_transient", m.pose_transient)?;
        non_negative("metrics.velocity_transient", m.velocity_transient)?;
        if !(m.convergence_threshold > 0.0 && m.convergence_threshold < 1.0) {
            return Err(invalid(
                "metrics.convergence_threshold",
                format!("must lie in (0, 1), got {}", m.convergence_threshold),
            ));
        }
        for (i, g) in self.sweep.gains.iter().enumerate() {
            non_negative(&format!("sweep.gains[{i}]"), *g)?;
        }
        for n in &self.sweep.nodes {
            Grid::new(*n, self.material.length).map_err(|e| invalid("sweep.nodes", e.to_string()))?;
        }
        positive("sample_rate", self.sample_rate)?;
        positive("horizon", self.horizon)?;
        Ok(())
    }

    /// The observer's model: nominal parameters, no damping.
    pub fn observer_model(&self) -> Result<RodModel> {
        Ok(RodModel::new(self.material)?
            .with_gravity(self.loads.gravity())
            .with_tendon(self.tendon))
    }

    /// The ground-truth model with the twin perturbations applied.
    pub fn truth_model(&self) -> Result<RodModel> {
        let material = MaterialGeometry {
            density: self.material.density * self.twin.density_scale,
            ..self.material
        };
        Ok(RodModel::new(material)?
            .with_gravity(self.loads.gravity())
            .with_tendon(self.tendon)
            .with_stiffness_damping(self.twin.damping_beta)
            .with_hardening(self.twin.hardening))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nodes, self.material.length)
    }

    pub fn truth_inputs(&self) -> ProfileInputs {
        ProfileInputs {
            tension: self.tension.clone(),
            tip_force: self.loads.tip_force(),
        }
    }

    pub fn observer_config(&self) -> ObserverConfig {
        ObserverConfig {
            gains: self.observer.gains,
            error_kind: self.observer.error,
            max_staleness: self.observer.max_staleness,
            measured_rotation_load: self.observer.measured_rotation_load,
            output_rate: self.sample_rate,
            solver: self.observer.solver,
        }
    }

    pub fn with_gains(mut self, gains: ObserverGains) -> Self {
        self.observer.gains = gains;
        self
    }

    /// Fixed-step integration for both the truth and the observer.
    pub fn with_fixed_step(mut self, dt: f64) -> Self {
        for solver in [&mut self.solver, &mut self.observer.solver] {
            solver.integrator = IntegratorKind::FixedStepSemiImplicit;
            solver.fixed_step = dt;
        }
        self
    }
}
