use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::discretization::{discrete_equilibrium, simulate, InputSignal, LoadInputs, RodDynamics, SampledInputs, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::liegroup::{exp_rotation, quaternion_from_rotation, Twist, Vec3};
use crate::observer::{MeasurementStream, TipMeasurement};

use super::config::{ExperimentConfig, NoiseConfig};

/// Ground truth plus what a sensor suite would have recorded of it.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinData {
    pub truth: TrajectoryRecord,
    pub measurements: MeasurementStream,
    /// Measured tension and the known tip force, held between samples.
    pub inputs: SampledInputs,
}

// one independent random stream per channel
const POSITION_STREAM: u64 = 1;
const ROTATION_STREAM: u64 = 2;
const ANGULAR_VELOCITY_STREAM: u64 = 3;
const LINEAR_VELOCITY_STREAM: u64 = 4;
const TENSION_STREAM: u64 = 5;

struct Channel {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl Channel {
    fn new(seed: u64, stream: u64, sigma: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let normal = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter {
                key: "noise".into(),
                reason: e.to_string(),
            })?)
        } else {
            None
        };
        Ok(Self { rng, normal })
    }

    fn sample(&mut self) -> f64 {
        match &self.normal {
            Some(n) => n.sample(&mut self.rng),
            None => 0.0,
        }
    }

    fn vec3(&mut self) -> Vec3 {
        Vec3::new(self.sample(), self.sample(), self.sample())
    }
}

/// Centered moving average with the window truncated at both ends.
pub fn moving_average(values: &[Twist], window: usize) -> Vec<Twist> {
    if window <= 1 || values.is_empty() {
        return values.to_vec();
    }
    let half = window / 2;
    (0..values.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(values.len());
            values[lo..hi].iter().sum::<Twist>() / (hi - lo) as f64
        })
        .collect()
}

/// Samples the truth's tip at every output time and corrupts it with noise.
pub fn measure<I: InputSignal + ?Sized>(
    truth: &TrajectoryRecord,
    inputs: &I,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<(MeasurementStream, SampledInputs)> {
    let mut position = Channel::new(seed, POSITION_STREAM, noise.position)?;
    let mut rotation = Channel::new(seed, ROTATION_STREAM, noise.rotation_deg.to_radians())?;
    let mut angular = Channel::new(seed, ANGULAR_VELOCITY_STREAM, noise.angular_velocity)?;
    let mut linear = Channel::new(seed, LINEAR_VELOCITY_STREAM, noise.linear_velocity)?;
    let mut tension = Channel::new(seed, TENSION_STREAM, noise.tension)?;

    let mut poses = Vec::with_capacity(truth.len());
    let mut twists = Vec::with_capacity(truth.len());
    let mut loads = Vec::with_capacity(truth.len());
    for sample in &truth.samples {
        let tip = sample.tip_pose();
        let noisy = tip.rotation * exp_rotation(&rotation.vec3());
        poses.push((quaternion_from_rotation(&noisy), tip.position + position.vec3()));
        let eta = sample.tip_twist();
        let w = eta.fixed_rows::<3>(0) + angular.vec3();
        let v = eta.fixed_rows::<3>(3) + linear.vec3();
        twists.push(Twist::from([w.x, w.y, w.z, v.x, v.y, v.z]));
        let exact = inputs.inputs_at(sample.t, sample.t);
        loads.push(LoadInputs {
            tension: exact.tension + tension.sample(),
            tip_force: exact.tip_force,
        });
    }
    let twists = moving_average(&twists, noise.velocity_window);
    let measurements = truth
        .samples
        .iter()
        .zip(poses)
        .zip(twists)
        .map(|((s, (q, p)), twist)| TipMeasurement::from_wire(s.t, q, p, twist))
        .collect();
    Ok((
        MeasurementStream::new(measurements)?,
        SampledInputs::new(truth.times(), loads)?,
    ))
}

/// Simulates the perturbed truth from its static equilibrium and records
/// noisy tip measurements at the sample rate.
pub fn generate_twin_truth(config: &ExperimentConfig) -> Result<TwinData> {
    config.validate()?;
    let model = config.truth_model()?;
    let grid = config.grid()?;
    let dynamics = RodDynamics::new(&model, grid);
    let inputs = config.truth_inputs();
    let initial = discrete_equilibrium(&dynamics, &inputs.inputs_at(0.0, 0.0))?;
    let truth = simulate(&dynamics, &initial, &inputs, config.horizon, config.sample_rate, &config.solver)?;
    let (measurements, inputs) = measure(&truth, &inputs, &config.noise, config.seed)?;
    Ok(TwinData {
        truth,
        measurements,
        inputs,
    })
}
