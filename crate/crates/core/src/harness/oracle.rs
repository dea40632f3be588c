//! Static equilibrium by shooting: integrate pose and internal wrench along
//! the arc length from the clamped base and adjust the unknown base wrench
//! until the tip condition holds. Shares no code with the finite-difference
//! grid.

use nalgebra::{Matrix6, SVector};

use crate::discretization::LoadInputs;
use crate::error::{Error, Result};
use crate::liegroup::{ad_transpose_apply, angular, hat3, linear, twist, Mat3, Pose, Twist, Vec3};
use crate::rod_model::{gravity_wrench, RodModel};

type State = SVector<f64, 18>;

/// Adaptive Dormand-Prince 5(4) for a fixed-size system.
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for DormandPrince {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 100_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_HAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl DormandPrince {
    /// Integrates `y' = f(s, y)` from `s0` to `s1`.
    pub fn integrate<const D: usize, F>(&self, f: &F, s0: f64, y0: SVector<f64, D>, s1: f64) -> Result<SVector<f64, D>>
    where
        F: Fn(f64, &SVector<f64, D>) -> Result<SVector<f64, D>>,
    {
        let mut s = s0;
        let mut y = y0;
        let span = s1 - s0;
        if span == 0.0 {
            return Ok(y);
        }
        let mut h = span / 8.0;
        let mut k = [SVector::<f64, D>::zeros(); 7];
        k[0] = f(s, &y)?;
        for _ in 0..self.max_steps {
            if (s1 - s) * span.signum() <= 1e-14 * span.abs() {
                return Ok(y);
            }
            if (s + h - s1) * span.signum() > 0.0 {
                h = s1 - s;
            }
            for i in 1..7 {
                let mut yi = y;
                for j in 0..i {
                    if A[i][j] != 0.0 {
                        yi += k[j] * (h * A[i][j]);
                    }
                }
                k[i] = f(s + C[i] * h, &yi)?;
            }
            let mut y5 = y;
            let mut err = SVector::<f64, D>::zeros();
            for i in 0..7 {
                y5 += k[i] * (h * B[i]);
                err += k[i] * (h * (B[i] - B_HAT[i]));
            }
            let norm = (0..D)
                .map(|i| {
                    let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                    (err[i] / sc).powi(2)
                })
                .sum::<f64>()
                / D as f64;
            let norm = norm.sqrt();
            if !norm.is_finite() {
                h *= 0.25;
                continue;
            }
            if norm <= 1.0 {
                s += h;
                y = y5;
                k[0] = k[6];
            }
            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= if norm <= 1.0 { factor } else { factor.min(1.0) };
        }
        Err(Error::NoConvergence {
            what: "arc-length integration",
            detail: format!("more than {} steps", self.max_steps),
        })
    }
}

/// Solution of the static boundary-value problem at evenly spaced points.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    pub arc_lengths: Vec<f64>,
    pub poses: Vec<Pose>,
    pub strain: Vec<Twist>,
    pub internal_wrench: Vec<Twist>,
    /// Largest component of `Phi(l) - Phi_tip`.
    pub boundary_residual: f64,
}

impl StaticSolution {
    pub fn tip(&self) -> &Pose {
        self.poses.last().expect("non-empty solution")
    }
}

/// Strain whose internal wrench (at rest, under `tension`) equals `phi`.
fn strain_from_wrench(model: &RodModel, phi: &Twist, tension: f64) -> Result<Twist> {
    let compliance = model
        .sections
        .stiffness
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;
    let mut xi = model.reference_strain + compliance * phi;
    if tension == 0.0 && model.hardening == 0.0 {
        return Ok(xi);
    }
    for _ in 0..200 {
        let extra = model.internal_wrench(&xi, &Twist::zeros(), tension)?
            - model.sections.stiffness * (xi - model.reference_strain);
        let next = model.reference_strain + compliance * (phi - extra);
        let delta = (next - xi).amax();
        xi = next;
        if delta <= 1e-15 * xi.amax().max(1.0) {
            return Ok(xi);
        }
    }
    Err(Error::NoConvergence {
        what: "strain recovery",
        detail: "fixed-point iteration on the constitutive law".into(),
    })
}

fn unpack(y: &State) -> (Mat3, Vec3, Twist) {
    let r = Mat3::from_column_slice(&y.as_slice()[0..9]);
    let p = Vec3::from_column_slice(&y.as_slice()[9..12]);
    let phi = Twist::from_column_slice(&y.as_slice()[12..18]);
    (r, p, phi)
}

fn pack(r: &Mat3, p: &Vec3, phi: &Twist) -> State {
    let mut y = State::zeros();
    y.as_mut_slice()[0..9].copy_from_slice(r.as_slice());
    y.as_mut_slice()[9..12].copy_from_slice(p.as_slice());
    y.as_mut_slice()[12..18].copy_from_slice(phi.as_slice());
    y
}

/// `d/ds (R, p, Phi) = (R u^, R q, ad_xi^T Phi - Psi)`.
fn static_rhs(model: &RodModel, tension: f64, y: &State) -> Result<State> {
    let (r, _, phi) = unpack(y);
    let xi = strain_from_wrench(model, &phi, tension)?;
    let dr = r * hat3(&angular(&xi));
    let dp = r * linear(&xi);
    let psi = gravity_wrench(&r, model.mass_per_length(), &model.gravity);
    let dphi = ad_transpose_apply(&xi, &phi) - psi;
    Ok(pack(&dr, &dp, &dphi))
}

struct Shot {
    samples: Vec<State>,
    residual: Twist,
}

fn shoot(model: &RodModel, loads: &LoadInputs, base_wrench: &Twist, points: usize, ode: &DormandPrince) -> Result<Shot> {
    let length = model.material.length;
    let rhs = |_s: f64, y: &State| static_rhs(model, loads.tension, y);
    let mut y = pack(&Mat3::identity(), &Vec3::zeros(), base_wrench);
    let mut samples = Vec::with_capacity(points);
    samples.push(y);
    for k in 1..points {
        let (a, b) = (
            length * (k - 1) as f64 / (points - 1) as f64,
            length * k as f64 / (points - 1) as f64,
        );
        y = ode.integrate(&rhs, a, y, b)?;
        samples.push(y);
    }
    let (r, _, phi) = unpack(&y);
    let target = twist(Vec3::zeros(), r.transpose() * loads.tip_force);
    Ok(Shot {
        samples,
        residual: phi - target,
    })
}

/// Base wrench of a straight rod carrying the loads, used as the first guess.
fn straight_guess(model: &RodModel, loads: &LoadInputs) -> Twist {
    let length = model.material.length;
    let weight = model.mass_per_length() * model.gravity;
    let force = loads.tip_force + weight * length;
    let moment = Vec3::x().cross(&(loads.tip_force * length + weight * (0.5 * length * length)));
    twist(moment, force)
}

/// Solves the static rod under gravity, tendon tension and a spatial tip
/// force by Newton iteration on the base wrench. Returns `points` evenly
/// spaced samples along the rod.
pub fn static_equilibrium_oracle(model: &RodModel, loads: &LoadInputs, points: usize) -> Result<StaticSolution> {
    if points < 2 {
        return Err(Error::InvalidParameter {
            key: "points".into(),
            reason: "need at least two samples".into(),
        });
    }
    let ode = DormandPrince::default();
    let mut base = straight_guess(model, loads);
    let mut shot = shoot(model, loads, &base, points, &ode)?;
    for _ in 0..50 {
        if shot.residual.amax() < 1e-10 {
            return Ok(finish(model, loads, shot, points));
        }
        let mut jac = Matrix6::zeros();
        for j in 0..6 {
            let delta = 1e-6 * base[j].abs().max(1e-3);
            let mut plus = base;
            plus[j] += delta;
            let mut minus = base;
            minus[j] -= delta;
            let rp = shoot(model, loads, &plus, 2, &ode)?.residual;
            let rm = shoot(model, loads, &minus, 2, &ode)?.residual;
            jac.set_column(j, &((rp - rm) / (2.0 * delta)));
        }
        let step = jac.lu().solve(&(-shot.residual)).ok_or(Error::SingularMatrix)?;
        let current = shot.residual.norm();
        let mut lambda = 1.0;
        loop {
            let trial = base + step * lambda;
            match shoot(model, loads, &trial, points, &ode) {
                Ok(next) if next.residual.norm() < current || lambda < 1e-3 => {
                    base = trial;
                    shot = next;
                    break;
                }
                Ok(_) | Err(Error::NoConvergence { .. }) | Err(Error::DegenerateTendon { .. }) => {
                    lambda *= 0.5;
                    if lambda < 1e-4 {
                        return Err(Error::NoConvergence {
                            what: "shooting",
                            detail: format!("line search stalled at residual {current:e}"),
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    if shot.residual.amax() < 1e-8 {
        return Ok(finish(model, loads, shot, points));
    }
    Err(Error::NoConvergence {
        what: "shooting",
        detail: format!("tip residual {:e}", shot.residual.amax()),
    })
}

fn finish(model: &RodModel, loads: &LoadInputs, shot: Shot, points: usize) -> StaticSolution {
    let length = model.material.length;
    let mut solution = StaticSolution {
        arc_lengths: (0..points).map(|k| length * k as f64 / (points - 1) as f64).collect(),
        poses: Vec::with_capacity(points),
        strain: Vec::with_capacity(points),
        internal_wrench: Vec::with_capacity(points),
        boundary_residual: shot.residual.amax(),
    };
    for y in &shot.samples {
        let (r, p, phi) = unpack(y);
        solution.poses.push(Pose::new(r, p));
        solution
            .strain
            .push(strain_from_wrench(model, &phi, loads.tension).expect("recovered during shooting"));
        solution.internal_wrench.push(phi);
    }
    solution
}
