use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::liegroup::{ad_apply, ad_transpose_apply, linear, Pose, Twist, Vec3};
use crate::rod_model::{tip_load_wrench, RodModel};

use super::grid::{reconstruct_poses, sbp_derivative, Grid};

/// Values per node in the flat state vector: strain then velocity.
pub const NODE_DOF: usize = 12;

/// Strain and velocity fields sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RodState {
    pub t: f64,
    pub strain: Vec<Twist>,
    pub velocity: Vec<Twist>,
}

impl RodState {
    /// Undeformed rod at rest.
    pub fn straight(grid: &Grid, reference_strain: &Twist) -> Self {
        Self {
            t: 0.0,
            strain: vec![*reference_strain; grid.nodes()],
            velocity: vec![Twist::zeros(); grid.nodes()],
        }
    }

    pub fn nodes(&self) -> usize {
        self.strain.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut y = DVector::zeros(self.nodes() * NODE_DOF);
        for (i, (xi, eta)) in self.strain.iter().zip(&self.velocity).enumerate() {
            y.fixed_rows_mut::<6>(NODE_DOF * i).copy_from(xi);
            y.fixed_rows_mut::<6>(NODE_DOF * i + 6).copy_from(eta);
        }
        y
    }

    pub fn from_vector(t: f64, y: &DVector<f64>) -> Self {
        let (strain, velocity) = split_fields(y.as_slice());
        Self { t, strain, velocity }
    }

    pub fn is_finite(&self) -> bool {
        self.strain
            .iter()
            .chain(&self.velocity)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

pub(crate) fn split_fields(y: &[f64]) -> (Vec<Twist>, Vec<Twist>) {
    let n = y.len() / NODE_DOF;
    let mut strain = Vec::with_capacity(n);
    let mut velocity = Vec::with_capacity(n);
    for chunk in y.chunks_exact(NODE_DOF) {
        strain.push(Twist::from_column_slice(&chunk[..6]));
        velocity.push(Twist::from_column_slice(&chunk[6..]));
    }
    (strain, velocity)
}

/// External inputs held over one integration segment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadInputs {
    /// N, tendon tension
    pub tension: f64,
    /// N, spatial frame
    pub tip_force: Vec3,
}

/// Time derivatives of both fields plus the intermediates used to get them.
#[derive(Debug, Clone)]
pub struct FieldRates {
    pub strain_rate: Vec<Twist>,
    pub velocity_rate: Vec<Twist>,
    pub poses: Vec<Pose>,
    /// Constitutive wrench at every node, tip included.
    pub internal_wrench: Vec<Twist>,
    /// Boundary value imposed at the tip.
    pub tip_wrench: Twist,
}

/// Method-of-lines semi-discretization of the compatibility and balance
/// equations on a fixed grid, base clamped at the identity pose.
#[derive(Debug, Clone)]
pub struct RodDynamics<'a> {
    pub model: &'a RodModel,
    pub grid: Grid,
    inverse_inertia: Twist,
    /// Extra body-frame distributed wrench per node (manufactured loads).
    pub body_wrench: Option<&'a [Twist]>,
    pub base: Pose,
}

impl<'a> RodDynamics<'a> {
    pub fn new(model: &'a RodModel, grid: Grid) -> Self {
        let inverse_inertia = model.sections.inertia.diagonal().map(|j| 1.0 / j);
        Self {
            model,
            grid,
            inverse_inertia,
            body_wrench: None,
            base: Pose::identity(),
        }
    }

    pub fn with_body_wrench(mut self, wrench: &'a [Twist]) -> Self {
        self.body_wrench = Some(wrench);
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.nodes() * NODE_DOF
    }

    pub fn poses(&self, strain: &[Twist]) -> Vec<Pose> {
        reconstruct_poses(strain, self.grid.spacing(), &self.base)
    }

    /// Forward-model rates with the tip loaded only by the spatial tip force.
    pub fn rates(&self, strain: &[Twist], velocity: &[Twist], inputs: &LoadInputs) -> Result<FieldRates> {
        self.rates_with_tip(strain, velocity, inputs.tension, |tip, _| {
            Ok(tip_load_wrench(&tip.rotation, &inputs.tip_force))
        })
    }

    /// Rates with the tip boundary wrench supplied by `tip_wrench(tip pose,
    /// tip velocity)`. The boundary value enters as a penalty on the tip
    /// node's balance, `(phi_tip - phi_N) / w_N`, which makes the energy
    /// rate of the discrete rod exactly the power of the tip wrench.
    pub fn rates_with_tip<F>(
        &self,
        strain: &[Twist],
        velocity: &[Twist],
        tension: f64,
        tip_wrench: F,
    ) -> Result<FieldRates>
    where
        F: FnOnce(&Pose, &Twist) -> Result<Twist>,
    {
        let n = self.grid.nodes();
        debug_assert_eq!(strain.len(), n);
        let h = self.grid.spacing();
        for (i, xi) in strain.iter().enumerate() {
            let q = linear(xi).norm();
            if !(q >= 1e-9) {
                return Err(Error::CompressedSection(q, i));
            }
        }
        let poses = self.poses(strain);

        let eta_s = sbp_derivative(velocity, h);
        let strain_rate: Vec<Twist> = (0..n)
            .map(|i| eta_s[i] + ad_apply(&strain[i], &velocity[i]))
            .collect();

        let mut internal = Vec::with_capacity(n);
        for i in 0..n {
            let phi = self
                .model
                .internal_wrench(&strain[i], &strain_rate[i], tension)
                .map_err(|e| match e {
                    Error::DegenerateTendon { norm, .. } => Error::DegenerateTendon { norm, node: Some(i) },
                    other => other,
                })?;
            internal.push(phi);
        }
        let boundary = tip_wrench(&poses[n - 1], &velocity[n - 1])?;

        let phi_s = sbp_derivative(&internal, h);
        let inertia = &self.model.sections.inertia;
        let mass = self.model.mass_per_length();
        let gravity_on = self.model.gravity != Vec3::zeros();
        let tip_weight = self.grid.weights()[n - 1];
        let mut velocity_rate = Vec::with_capacity(n);
        velocity_rate.push(Twist::zeros());
        for i in 1..n {
            let mut force = phi_s[i] - ad_transpose_apply(&strain[i], &internal[i])
                + ad_transpose_apply(&velocity[i], &(inertia * velocity[i]));
            if gravity_on {
                let g = poses[i].rotation.transpose() * (mass * self.model.gravity);
                force[3] += g.x;
                force[4] += g.y;
                force[5] += g.z;
            }
            if let Some(extra) = self.body_wrench {
                force += extra[i];
            }
            if i == n - 1 {
                force += (boundary - internal[i]) / tip_weight;
            }
            velocity_rate.push(force.component_mul(&self.inverse_inertia));
        }

        Ok(FieldRates {
            strain_rate,
            velocity_rate,
            poses,
            internal_wrench: internal,
            tip_wrench: boundary,
        })
    }

    /// Writes rates into the flat layout used by the integrators.
    pub fn write_flat(rates: &FieldRates, dy: &mut DVector<f64>) {
        for (i, (a, b)) in rates.strain_rate.iter().zip(&rates.velocity_rate).enumerate() {
            dy.fixed_rows_mut::<6>(NODE_DOF * i).copy_from(a);
            dy.fixed_rows_mut::<6>(NODE_DOF * i + 6).copy_from(b);
        }
    }

    /// Kinetic + elastic + gravitational energy under the grid's quadrature.
    pub fn mechanical_energy(&self, state: &RodState) -> f64 {
        let sections = &self.model.sections;
        let poses = self.poses(&state.strain);
        let mass = self.model.mass_per_length();
        self.grid
            .weights()
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let eta = &state.velocity[i];
                let dxi = state.strain[i] - self.model.reference_strain;
                let kinetic = 0.5 * eta.dot(&(sections.inertia * eta));
                let elastic = 0.5 * dxi.dot(&(sections.stiffness * dxi));
                let potential = -mass * self.model.gravity.dot(&poses[i].position);
                w * (kinetic + elastic + potential)
            })
            .sum()
    }
}
