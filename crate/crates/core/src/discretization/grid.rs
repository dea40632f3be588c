use crate::error::{Error, Result};
use crate::liegroup::{exp_pose, pose_compose, Pose, Twist};

/// Uniform arc-length grid on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nodes: usize,
    length: f64,
}

impl Grid {
    pub const DEFAULT_NODES: usize = 21;
    /// Smallest grid on which the two boundary closures of
    /// [`sbp_derivative`] do not overlap.
    pub const MIN_NODES: usize = 9;

    pub fn new(nodes: usize, length: f64) -> Result<Self> {
        if nodes < Self::MIN_NODES || nodes % 2 == 0 {
            return Err(Error::InvalidParameter {
                key: "grid.nodes".into(),
                reason: format!("need an odd node count >= {}, got {nodes}", Self::MIN_NODES),
            });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter {
                key: "material.length".into(),
                reason: format!("must be > 0, got {length}"),
            });
        }
        Ok(Self { nodes, length })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.nodes - 1) as f64
    }

    pub fn arc_length(&self, i: usize) -> f64 {
        if i + 1 == self.nodes {
            self.length
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn arc_lengths(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.arc_length(i)).collect()
    }

    /// Quadrature weights of the norm under which [`sbp_derivative`] sums
    /// by parts.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let n = self.nodes;
        (0..n)
            .map(|i| {
                let edge = i.min(n - 1 - i);
                h * NORM_EDGE.get(edge).copied().unwrap_or(1.0)
            })
            .collect()
    }
}

const NORM_EDGE: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

// rows 0..4 of the left boundary closure, columns 0..6
const CLOSURE: [[f64; 6]; 4] = [
    [-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0, 0.0, 0.0],
    [-0.5, 0.0, 0.5, 0.0, 0.0, 0.0],
    [4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0, 0.0],
    [3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0],
];

const INTERIOR: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

/// Summation-by-parts first derivative with the diagonal norm of
/// [`Grid::weights`]: fourth order inside, second order in the four nodes
/// at each end. `H D + (H D)^T = diag(-1, 0, .., 0, 1)`, so the discrete
/// energy of the rod changes only through boundary power.
pub fn sbp_derivative(field: &[Twist], spacing: f64) -> Vec<Twist> {
    let n = field.len();
    assert!(n >= Grid::MIN_NODES - 1, "need at least eight nodes");
    let inv = 1.0 / spacing;
    let mut out = vec![Twist::zeros(); n];
    for (i, row) in CLOSURE.iter().enumerate() {
        let mut left = Twist::zeros();
        let mut right = Twist::zeros();
        for (j, c) in row.iter().enumerate() {
            left += *c * field[j];
            right -= *c * field[n - 1 - j];
        }
        out[i] = left * inv;
        out[n - 1 - i] = right * inv;
    }
    for i in 4..n - 4 {
        let mut d = Twist::zeros();
        for (k, c) in INTERIOR.iter().enumerate() {
            d += *c * field[i + k - 2];
        }
        out[i] = d * inv;
    }
    out
}

/// Second-order derivative along the grid: central differences inside,
/// three-point one-sided stencils at both ends. Not used by the dynamics,
/// whose boundary treatment needs [`sbp_derivative`].
pub fn spatial_derivative(field: &[Twist], spacing: f64) -> Vec<Twist> {
    let n = field.len();
    assert!(n >= 3, "need at least three nodes");
    let inv = 0.5 / spacing;
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * field[0] + 4.0 * field[1] - field[2]) * inv);
    for i in 1..n - 1 {
        out.push((field[i + 1] - field[i - 1]) * inv);
    }
    out.push((3.0 * field[n - 1] - 4.0 * field[n - 2] + field[n - 3]) * inv);
    out
}

/// Integrates `dg/ds = g xi^` with one exact exponential per interval of the
/// interval-averaged strain. Exact for piecewise-constant strain.
pub fn reconstruct_poses(strain: &[Twist], spacing: f64, base: &Pose) -> Vec<Pose> {
    let mut poses = Vec::with_capacity(strain.len());
    let mut g = *base;
    poses.push(g);
    for pair in strain.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        g = pose_compose(&g, &exp_pose(&mid, spacing));
        poses.push(g);
    }
    poses
}
