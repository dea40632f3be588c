use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, TrajectoryRecord, TrajectorySample};
use crate::error::{Error, Result};
use crate::liegroup::{rotation_angle, Pose, Twist};
use crate::rod_model::SectionMatrices;

use super::config::MetricsConfig;

/// Planar angle about the spatial z-axis, `atan2(R10, R00)`.
pub fn planar_angle(pose: &Pose) -> f64 {
    pose.rotation[(1, 0)].atan2(pose.rotation[(0, 0)])
}

/// Per-channel values for the planar tip channels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelErrors {
    /// rad
    pub theta: f64,
    /// m
    pub x: f64,
    /// m
    pub y: f64,
    /// rad/s, body frame
    pub wz: f64,
    /// m/s, body frame
    pub vx: f64,
    /// m/s, body frame
    pub vy: f64,
    /// m, Euclidean tip position error
    pub position: f64,
}

/// Differences of the planar channels, estimate minus truth.
fn channel_differences(est: &TrajectorySample, truth: &TrajectorySample) -> ChannelErrors {
    let (pe, pt) = (est.tip_pose(), truth.tip_pose());
    let (ee, et): (&Twist, &Twist) = (est.tip_twist(), truth.tip_twist());
    let dtheta = planar_angle(pe) - planar_angle(pt);
    ChannelErrors {
        theta: (dtheta.sin()).atan2(dtheta.cos()),
        x: pe.position.x - pt.position.x,
        y: pe.position.y - pt.position.y,
        wz: ee[2] - et[2],
        vx: ee[3] - et[3],
        vy: ee[4] - et[4],
        position: (pe.position - pt.position).norm(),
    }
}

/// Checks that both records share their timestamps.
pub fn check_aligned(est: &TrajectoryRecord, truth: &TrajectoryRecord) -> Result<()> {
    if est.len() != truth.len() {
        return Err(Error::Misaligned(format!("{} samples vs {}", est.len(), truth.len())));
    }
    if est.is_empty() {
        return Err(Error::Misaligned("empty trajectories".into()));
    }
    for (a, b) in est.samples.iter().zip(&truth.samples) {
        if (a.t - b.t).abs() > 1e-9 * a.t.abs().max(1.0) {
            return Err(Error::Misaligned(format!("timestamps {} and {} differ", a.t, b.t)));
        }
    }
    Ok(())
}

/// Root-mean-square error per planar channel over `t >= cut` (pose channels)
/// and `t >= velocity_cut` (velocity channels).
pub fn rmse_after_transient(
    est: &TrajectoryRecord,
    truth: &TrajectoryRecord,
    pose_cut: f64,
    velocity_cut: f64,
) -> Result<ChannelErrors> {
    check_aligned(est, truth)?;
    let t0 = truth.samples[0].t;
    let mut sums = ChannelErrors::default();
    let (mut pose_n, mut vel_n) = (0usize, 0usize);
    for (a, b) in est.samples.iter().zip(&truth.samples) {
        let d = channel_differences(a, b);
        if b.t - t0 >= pose_cut - 1e-9 {
            pose_n += 1;
            sums.theta += d.theta * d.theta;
            sums.x += d.x * d.x;
            sums.y += d.y * d.y;
            sums.position += d.position * d.position;
        }
        if b.t - t0 >= velocity_cut - 1e-9 {
            vel_n += 1;
            sums.wz += d.wz * d.wz;
            sums.vx += d.vx * d.vx;
            sums.vy += d.vy * d.vy;
        }
    }
    if pose_n == 0 || vel_n == 0 {
        return Err(Error::Misaligned("no samples after the transient cut".into()));
    }
    let (p, v) = (pose_n as f64, vel_n as f64);
    Ok(ChannelErrors {
        theta: (sums.theta / p).sqrt(),
        x: (sums.x / p).sqrt(),
        y: (sums.y / p).sqrt(),
        wz: (sums.wz / v).sqrt(),
        vx: (sums.vx / v).sqrt(),
        vy: (sums.vy / v).sqrt(),
        position: (sums.position / p).sqrt(),
    })
}

/// Largest absolute error per channel over the whole record.
pub fn max_error(est: &TrajectoryRecord, truth: &TrajectoryRecord) -> Result<ChannelErrors> {
    check_aligned(est, truth)?;
    Ok(est
        .samples
        .iter()
        .zip(&truth.samples)
        .map(|(a, b)| channel_differences(a, b))
        .fold(ChannelErrors::default(), |m, d| ChannelErrors {
            theta: m.theta.max(d.theta.abs()),
            x: m.x.max(d.x.abs()),
            y: m.y.max(d.y.abs()),
            wz: m.wz.max(d.wz.abs()),
            vx: m.vx.max(d.vx.abs()),
            vy: m.vy.max(d.vy.abs()),
            position: m.position.max(d.position),
        }))
}

/// Tip pose error `sqrt(angle(R_est^T R)^2 + |p_est - p|^2)`, mixing radians and metres.
pub fn pose_error_norm(est: &Pose, truth: &Pose) -> f64 {
    let angle = rotation_angle(&(est.rotation.transpose() * truth.rotation));
    (angle * angle + (est.position - truth.position).norm_squared()).sqrt()
}

/// Tip pose error at every sample.
pub fn pose_error_series(est: &TrajectoryRecord, truth: &TrajectoryRecord) -> Result<Vec<f64>> {
    check_aligned(est, truth)?;
    Ok(est
        .samples
        .iter()
        .zip(&truth.samples)
        .map(|(a, b)| pose_error_norm(a.tip_pose(), b.tip_pose()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Convergence {
    /// s after the first sample
    Converged { time: f64 },
    NoConvergence,
}

impl Convergence {
    pub fn time(&self) -> Option<f64> {
        match self {
            Convergence::Converged { time } => Some(*time),
            Convergence::NoConvergence => None,
        }
    }
}

/// Time after which the error stays at or below `threshold * errors[0]`:
/// the time of the last sample above the threshold, measured from the first
/// sample.
pub fn convergence_time_from_series(times: &[f64], errors: &[f64], threshold: f64) -> Result<Convergence> {
    if times.len() != errors.len() || times.is_empty() {
        return Err(Error::Misaligned("error series and timestamps differ in length".into()));
    }
    let e0 = errors[0];
    if !(e0 > 0.0) {
        return Err(Error::InvalidParameter {
            key: "initial_error".into(),
            reason: format!("convergence needs a nonzero initial error, got {e0}"),
        });
    }
    let limit = threshold * e0;
    match errors.iter().rposition(|e| !(*e <= limit)) {
        None => Ok(Convergence::Converged { time: 0.0 }),
        Some(k) if k + 1 == errors.len() => Ok(Convergence::NoConvergence),
        Some(k) => Ok(Convergence::Converged { time: times[k] - times[0] }),
    }
}

pub fn convergence_time(est: &TrajectoryRecord, truth: &TrajectoryRecord, threshold: f64) -> Result<Convergence> {
    let errors = pose_error_series(est, truth)?;
    convergence_time_from_series(&truth.times(), &errors, threshold)
}

/// `1/2 int (eta~^T J eta~ + xi~^T K xi~) ds` per sample, integrated with the
/// quadrature of the grid the records live on (the norm under which the
/// discrete rod conserves energy); trapezoid weights for other node layouts.
pub fn error_energy_series(
    est: &TrajectoryRecord,
    truth: &TrajectoryRecord,
    sections: &SectionMatrices,
) -> Result<Vec<f64>> {
    check_aligned(est, truth)?;
    if est.nodes() != truth.nodes() {
        return Err(Error::Misaligned(format!("{} nodes vs {}", est.nodes(), truth.nodes())));
    }
    let s = &truth.arc_lengths;
    let n = s.len();
    let weights = match Grid::new(n, s[n - 1]) {
        Ok(grid) if grid.arc_lengths() == *s => grid.weights(),
        _ => (0..n)
            .map(|i| {
                let left = if i > 0 { s[i] - s[i - 1] } else { 0.0 };
                let right = if i + 1 < n { s[i + 1] - s[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect(),
    };
    Ok(est
        .samples
        .iter()
        .zip(&truth.samples)
        .map(|(a, b)| {
            (0..n)
                .map(|i| {
                    let de = a.velocity[i] - b.velocity[i];
                    let dx = a.strain[i] - b.strain[i];
                    0.5 * weights[i] * (de.dot(&(sections.inertia * de)) + dx.dot(&(sections.stiffness * dx)))
                })
                .sum()
        })
        .collect())
}

/// Summary of one estimate against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: ChannelErrors,
    pub max_error: ChannelErrors,
    pub convergence: Convergence,
    pub initial_pose_error: f64,
    pub final_pose_error: f64,
    pub pose_error: Vec<f64>,
    /// Empty when the records use different grids.
    pub error_energy: Vec<f64>,
}

/// All metrics, as pure functions of the two records.
pub fn compute_metrics(
    est: &TrajectoryRecord,
    truth: &TrajectoryRecord,
    config: &MetricsConfig,
    sections: &SectionMatrices,
) -> Result<Metrics> {
    let pose_error = pose_error_series(est, truth)?;
    let convergence = if pose_error[0] > 0.0 {
        convergence_time_from_series(&truth.times(), &pose_error, config.convergence_threshold)?
    } else if pose_error.iter().all(|e| *e == 0.0) {
        Convergence::Converged { time: 0.0 }
    } else {
        Convergence::NoConvergence
    };
    let error_energy = if est.nodes() == truth.nodes() {
        error_energy_series(est, truth, sections)?
    } else {
        Vec::new()
    };
    Ok(Metrics {
        rmse: rmse_after_transient(est, truth, config.pose_transient, config.velocity_transient)?,
        max_error: max_error(est, truth)?,
        convergence,
        initial_pose_error: pose_error[0],
        final_pose_error: *pose_error.last().expect("non-empty"),
        pose_error,
        error_energy,
    })
}
