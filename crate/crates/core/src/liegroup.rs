//! Small-matrix operator algebra on SO(3) and SE(3).
//!
//! Twists are stacked 6-vectors with the angular block first, `(w, v)` for a
//! velocity twist and `(u, q)` for a strain twist. Every 6x6 block matrix in
//! the crate follows the same ordering.

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat6 = Matrix6<f64>;
pub type Twist = Vector6<f64>;

/// Tolerance used by `vee3`/`vee6` to accept a matrix as skew-symmetric.
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Relative rotations closer than this to pi have no unique logarithm.
pub const LOG_BRANCH_MARGIN: f64 = 1e-6;

// Below this angle the exp/log coefficients switch to their Taylor series.
const SERIES_ANGLE: f64 = 1e-3;

pub fn twist(angular: Vec3, linear: Vec3) -> Twist {
    Twist::new(
        angular.x, angular.y, angular.z, linear.x, linear.y, linear.z,
    )
}

#[inline]
pub fn angular(t: &Twist) -> Vec3 {
    Vec3::new(t[0], t[1], t[2])
}

#[inline]
pub fn linear(t: &Twist) -> Vec3 {
    Vec3::new(t[3], t[4], t[5])
}

/// Skew matrix with `hat3(v) * x == v.cross(x)`.
#[inline]
pub fn hat3(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee3(m: &Mat3) -> Result<Vec3> {
    let asym = (m + m.transpose()).abs().max();
    if !asym.is_finite() || asym > SKEW_TOLERANCE {
        return Err(Error::NotSkew(asym));
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Axial vector of the skew part, no validation.
#[inline]
fn skew_axial(m: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        m[(2, 1)] - m[(1, 2)],
        m[(0, 2)] - m[(2, 0)],
        m[(1, 0)] - m[(0, 1)],
    )
}

pub fn hat6(t: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&angular(t)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&linear(t));
    m
}

pub fn vee6(m: &Matrix4<f64>) -> Result<Twist> {
    let last_row = m.fixed_view::<1, 4>(3, 0).abs().max();
    if !last_row.is_finite() || last_row > SKEW_TOLERANCE {
        return Err(Error::NotSe3Algebra(last_row));
    }
    let w = vee3(&m.fixed_view::<3, 3>(0, 0).into_owned())?;
    let v = m.fixed_view::<3, 1>(0, 3).into_owned();
    Ok(twist(w, v))
}

/// Adjoint of the Lie algebra: `[[w^, 0], [v^, w^]]`.
pub fn ad(t: &Twist) -> Mat6 {
    let w = hat3(&angular(t));
    let v = hat3(&linear(t));
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&v);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    m
}

/// `ad(a) * b` without forming the matrix.
#[inline]
pub fn ad_apply(a: &Twist, b: &Twist) -> Twist {
    let (aw, av) = (angular(a), linear(a));
    let (bw, bv) = (angular(b), linear(b));
    twist(aw.cross(&bw), av.cross(&bw) + aw.cross(&bv))
}

/// `ad(a)^T * b` without forming the matrix.
#[inline]
pub fn ad_transpose_apply(a: &Twist, b: &Twist) -> Twist {
    let (aw, av) = (angular(a), linear(a));
    let (bm, bn) = (angular(b), linear(b));
    // hat3(x)^T y = -x cross y = y cross x
    twist(bm.cross(&aw) + bn.cross(&av), bn.cross(&aw))
}

/// Rigid transform of a cross-section frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub position: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            position: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Mat3, position: Vec3) -> Self {
        Self { rotation, position }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        pose_compose(self, other)
    }

    pub fn inverse(&self) -> Pose {
        pose_inverse(self)
    }

    /// Largest deviation from `R^T R = I` and `det R = 1`.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = &self.rotation;
        let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
        ortho.max((r.determinant() - 1.0).abs())
    }

    /// Rotation angle in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }
}

pub fn pose_compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: a.rotation * b.rotation,
        position: a.rotation * b.position + a.position,
    }
}

pub fn pose_inverse(a: &Pose) -> Pose {
    let rt = a.rotation.transpose();
    Pose {
        rotation: rt,
        position: -(rt * a.position),
    }
}

pub fn rotation_angle(r: &Mat3) -> f64 {
    let s = skew_axial(r).norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

// sin(x)/x, (1-cos x)/x^2, (x - sin x)/x^3
fn exp_coefficients(angle: f64) -> (f64, f64, f64) {
    if angle < SERIES_ANGLE {
        let a2 = angle * angle;
        (
            1.0 - a2 / 6.0 * (1.0 - a2 / 20.0),
            0.5 - a2 / 24.0 * (1.0 - a2 / 30.0),
            1.0 / 6.0 - a2 / 120.0 * (1.0 - a2 / 42.0),
        )
    } else {
        let half = 0.5 * angle;
        let sinc_half = half.sin() / half;
        (
            angle.sin() / angle,
            0.5 * sinc_half * sinc_half,
            (angle - angle.sin()) / (angle * angle * angle),
        )
    }
}

/// Rodrigues rotation `exp(hat3(w))`.
pub fn exp_rotation(w: &Vec3) -> Mat3 {
    let angle = w.norm();
    let (a, b, _) = exp_coefficients(angle);
    let k = hat3(w);
    Mat3::identity() + a * k + b * (k * k)
}

/// Closed-form SE(3) exponential of `step * t`.
pub fn exp_pose(t: &Twist, step: f64) -> Pose {
    let w = angular(t) * step;
    let v = linear(t) * step;
    let angle = w.norm();
    let (a, b, c) = exp_coefficients(angle);
    let k = hat3(&w);
    let k2 = k * k;
    let rotation = Mat3::identity() + a * k + b * k2;
    let left_jacobian = Mat3::identity() + b * k + c * k2;
    Pose {
        rotation,
        position: left_jacobian * v,
    }
}

/// Rotation logarithm, rejecting angles within `LOG_BRANCH_MARGIN` of pi.
pub fn log_rotation(r: &Mat3) -> Result<Vec3> {
    let axial = skew_axial(r);
    let s = axial.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let angle = s.atan2(c);
    if angle > std::f64::consts::PI - LOG_BRANCH_MARGIN {
        return Err(Error::LogBranchCut(angle));
    }
    let scale = if angle < SERIES_ANGLE {
        let a2 = angle * angle;
        1.0 + a2 / 6.0 + 7.0 * a2 * a2 / 360.0
    } else {
        angle / s
    };
    Ok(scale * axial)
}

pub fn log_pose(g: &Pose) -> Result<Twist> {
    let w = log_rotation(&g.rotation)?;
    let angle = w.norm();
    let k = hat3(&w);
    // inverse of the left Jacobian: I - k/2 + d k^2
    let d = if angle < SERIES_ANGLE {
        let a2 = angle * angle;
        1.0 / 12.0 + a2 / 720.0 + a2 * a2 / 30240.0
    } else {
        let half = 0.5 * angle;
        (1.0 - half / half.tan()) / (angle * angle)
    };
    let inv_jacobian = Mat3::identity() - 0.5 * k + d * (k * k);
    Ok(twist(w, inv_jacobian * g.position))
}

/// Which tip pose-error map the observer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseErrorKind {
    #[default]
    Skew,
    Log,
}

/// Estimate-minus-measurement pose error built from the skew part of the
/// relative rotation, expressed in the estimate's body frame.
///
/// The angular block is `(R^T R_est - R_est^T R)^vee / 2`, which equals
/// `sin(angle) * axis` and so also vanishes at a relative angle of pi.
pub fn pose_error_skew(estimate: &Pose, measured: &Pose) -> Twist {
    let rel = measured.rotation.transpose() * estimate.rotation;
    let w = skew_axial(&rel);
    let v = estimate.rotation.transpose() * (estimate.position - measured.position);
    twist(w, v)
}

/// Estimate-minus-measurement pose error `log(g^-1 g_est)^vee`.
pub fn pose_error_log(estimate: &Pose, measured: &Pose) -> Result<Twist> {
    log_pose(&pose_compose(&pose_inverse(measured), estimate))
}

pub fn pose_error(kind: PoseErrorKind, estimate: &Pose, measured: &Pose) -> Result<Twist> {
    match kind {
        PoseErrorKind::Skew => Ok(pose_error_skew(estimate, measured)),
        PoseErrorKind::Log => pose_error_log(estimate, measured),
    }
}

/// Rotation matrix of a (not necessarily unit) quaternion `(w, x, y, z)`.
pub fn rotation_from_quaternion(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = q;
    let s = 2.0 / (w * w + x * x + y * y + z * z);
    Mat3::new(
        1.0 - s * (y * y + z * z),
        s * (x * y - w * z),
        s * (x * z + w * y),
        s * (x * y + w * z),
        1.0 - s * (x * x + z * z),
        s * (y * z - w * x),
        s * (x * z - w * y),
        s * (y * z + w * x),
        1.0 - s * (x * x + y * y),
    )
}

/// Unit quaternion `(w, x, y, z)` with `w >= 0`.
pub fn quaternion_from_rotation(r: &Mat3) -> [f64; 4] {
    let trace = r.trace();
    let q = if trace > 0.0 {
        let s = 2.0 * (trace + 1.0).sqrt();
        [
            0.25 * s,
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        ]
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
        [
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        ]
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
        [
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        ]
    } else {
        let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
        [
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        ]
    };
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
    q.map(|c| sign * c / n)
}
