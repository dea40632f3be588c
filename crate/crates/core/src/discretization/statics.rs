//! Static equilibrium of the semi-discrete rod, used to start runs from rest.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::liegroup::{Twist, Vec3};
use crate::rod_model::{tip_load_wrench, RodModel};

use super::dynamics::{LoadInputs, RodDynamics, RodState};

const MAX_ITERS: usize = 60;
const TOLERANCE: f64 = 1e-12;

/// Scaled residual of the discrete balance with zero velocity: nodes 1..N-1
/// plus constitutive consistency of the tip wrench at node N-1.
fn residual(dynamics: &RodDynamics, strain: &[Twist], loads: &LoadInputs) -> Result<DVector<f64>> {
    let n = strain.len();
    let zeros = vec![Twist::zeros(); n];
    let rates = dynamics.rates(strain, &zeros, loads)?;
    let model = dynamics.model;
    let inertia = model.sections.inertia.diagonal();
    let stiffness = model.sections.stiffness.diagonal();
    let h = dynamics.grid.spacing();
    let mut r = DVector::zeros(6 * n);
    for i in 1..n {
        let force = rates.velocity_rate[i].component_mul(&inertia);
        r.fixed_rows_mut::<6>(6 * (i - 1))
            .copy_from(&(force * h).component_div(&stiffness));
    }
    let tip = &strain[n - 1];
    let constitutive = model.internal_wrench(tip, &Twist::zeros(), loads.tension)?;
    let boundary = tip_load_wrench(&rates.poses[n - 1].rotation, &loads.tip_force);
    r.fixed_rows_mut::<6>(6 * (n - 1))
        .copy_from(&(constitutive - boundary).component_div(&stiffness));
    Ok(r)
}

fn flatten(strain: &[Twist]) -> DVector<f64> {
    DVector::from_iterator(strain.len() * 6, strain.iter().flat_map(|x| x.iter().copied()))
}

fn unflatten(x: &DVector<f64>) -> Vec<Twist> {
    x.as_slice().chunks_exact(6).map(Twist::from_column_slice).collect()
}

fn newton(dynamics: &RodDynamics, loads: &LoadInputs, guess: Vec<Twist>) -> Result<Vec<Twist>> {
    let mut x = flatten(&guess);
    let mut r = residual(dynamics, &guess, loads)?;
    let dim = x.len();
    for _ in 0..MAX_ITERS {
        if r.amax() < TOLERANCE {
            return Ok(unflatten(&x));
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let delta = 1e-7 * x[j].abs().max(1e-2);
            let mut xp = x.clone();
            xp[j] += delta;
            let rp = residual(dynamics, &unflatten(&xp), loads)?;
            jac.column_mut(j).copy_from(&((rp - &r) / delta));
        }
        let dx = jac.lu().solve(&(-&r)).ok_or(Error::SingularMatrix)?;
        let norm = r.norm();
        let mut lambda = 1.0;
        loop {
            let trial = &x + &dx * lambda;
            match residual(dynamics, &unflatten(&trial), loads) {
                Ok(rt) if rt.norm() < norm || dx.amax() * lambda < 1e-14 => {
                    x = trial;
                    r = rt;
                    break;
                }
                Ok(_) | Err(Error::CompressedSection(..)) | Err(Error::DegenerateTendon { .. }) => {
                    lambda *= 0.5;
                    if lambda < 1e-4 {
                        return Err(Error::NoConvergence {
                            what: "static equilibrium",
                            detail: format!("line search stalled at residual {norm:e}"),
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    if r.amax() < 1e3 * TOLERANCE {
        return Ok(unflatten(&x));
    }
    Err(Error::NoConvergence {
        what: "static equilibrium",
        detail: format!("residual {:e} after {MAX_ITERS} iterations", r.amax()),
    })
}

/// Discrete static equilibrium of `dynamics` under constant `loads`, found
/// by Newton's method from the straight rod with load continuation as a
/// fallback. Returns a state at rest at `t = 0`.
pub fn discrete_equilibrium(dynamics: &RodDynamics, loads: &LoadInputs) -> Result<RodState> {
    let straight = vec![dynamics.model.reference_strain; dynamics.grid.nodes()];
    let strain = match newton(dynamics, loads, straight.clone()) {
        Ok(s) => s,
        Err(_) => continuation(dynamics, loads, straight)?,
    };
    Ok(RodState {
        t: 0.0,
        velocity: vec![Twist::zeros(); strain.len()],
        strain,
    })
}

fn continuation(dynamics: &RodDynamics, loads: &LoadInputs, mut strain: Vec<Twist>) -> Result<Vec<Twist>> {
    const STAGES: usize = 16;
    for k in 1..=STAGES {
        let lambda = k as f64 / STAGES as f64;
        let model = RodModel {
            gravity: dynamics.model.gravity * lambda,
            ..dynamics.model.clone()
        };
        let mut scaled = RodDynamics::new(&model, dynamics.grid);
        scaled.base = dynamics.base;
        scaled.body_wrench = dynamics.body_wrench;
        let loads = LoadInputs {
            tension: loads.tension * lambda,
            tip_force: loads.tip_force * lambda,
        };
        strain = newton(&scaled, &loads, strain)?;
    }
    Ok(strain)
}

/// Tip force of a hanging mass, N.
pub fn hanging_mass_force(mass: f64, gravity: &Vec3) -> Vec3 {
    mass * gravity
}
