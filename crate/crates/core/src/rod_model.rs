//! Cross-section matrices, constitutive law and loads of the Cosserat rod.
//!
//! Body frames put the centerline tangent on the local x-axis, so the
//! unstretched reference strain is `(0, 0, 0, 1, 0, 0)` and the first entry of
//! each 3x3 block is the torsional (angular) or axial (linear) term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegroup::{angular, linear, twist, Mat3, Mat6, Twist, Vec3};

/// Backbone material and geometry, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialGeometry {
    /// m
    pub length: f64,
    /// m
    pub radius: f64,
    /// kg/m^3
    pub density: f64,
    /// Pa
    pub youngs: f64,
    /// Pa
    pub shear: f64,
    pub poisson: f64,
}

impl MaterialGeometry {
    /// Density after folding the disk masses into the backbone.
    pub const CALIBRATED_DENSITY: f64 = 20321.0;

    /// Aluminium 6061 backbone with the nominal density.
    pub fn nominal() -> Self {
        Self {
            length: 0.45,
            radius: 1.6e-3,
            density: 2700.0,
            youngs: 68.9e9,
            shear: 26e9,
            poisson: 0.325,
        }
    }

    /// Nominal backbone with the calibrated density.
    pub fn calibrated() -> Self {
        Self {
            density: Self::CALIBRATED_DENSITY,
            ..Self::nominal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("radius", self.radius),
            ("density", self.density),
            ("youngs", self.youngs),
            ("shear", self.shear),
            ("poisson", self.poisson),
        ];
        for (key, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    key: key.into(),
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if self.poisson >= 0.5 {
            return Err(Error::InvalidParameter {
                key: "poisson".into(),
                reason: format!("must lie in (0, 0.5), got {}", self.poisson),
            });
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Second moment of area `pi r^4 / 4`.
    pub fn area_moment(&self) -> f64 {
        std::f64::consts::PI * self.radius.powi(4) / 4.0
    }

    /// kg/m
    pub fn mass_per_length(&self) -> f64 {
        self.density * self.area()
    }

    pub fn bending_stiffness(&self) -> f64 {
        self.youngs * self.area_moment()
    }
}

fn block_diag(angular: Vec3, linear: Vec3) -> Mat6 {
    Mat6::from_diagonal(&twist(angular, linear))
}

/// `J = diag(J1, J2)`, `J1 = diag(2, 1, 1) rho pi r^4 / 4`, `J2 = rho pi r^2 I`.
pub fn section_inertia(mg: &MaterialGeometry) -> Mat6 {
    let rot = mg.density * mg.area_moment();
    let lin = mg.density * mg.area();
    block_diag(Vec3::new(2.0 * rot, rot, rot), Vec3::repeat(lin))
}

/// `K = diag(K1, K2)`, `K1 = diag(2G, E, E) pi r^4 / 4`, `K2 = diag(E, G, G) pi r^2`.
pub fn section_stiffness(mg: &MaterialGeometry) -> Mat6 {
    let i = mg.area_moment();
    let a = mg.area();
    block_diag(
        Vec3::new(2.0 * mg.shear * i, mg.youngs * i, mg.youngs * i),
        Vec3::new(mg.youngs * a, mg.shear * a, mg.shear * a),
    )
}

/// Inertia and stiffness of one cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionMatrices {
    pub inertia: Mat6,
    pub stiffness: Mat6,
}

impl SectionMatrices {
    pub fn from_material(mg: &MaterialGeometry) -> Self {
        Self {
            inertia: section_inertia(mg),
            stiffness: section_stiffness(mg),
        }
    }
}

/// Straight, unstretched reference strain.
pub fn straight_reference_strain() -> Twist {
    twist(Vec3::zeros(), Vec3::x())
}

/// `phi = K (xi - xi_ref)`.
pub fn elastic_wrench(xi: &Twist, xi_ref: &Twist, stiffness: &Mat6) -> Twist {
    stiffness * (xi - xi_ref)
}

/// Tendon routed through holes at a fixed body-frame offset from the centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TendonRouting {
    /// m, body frame
    pub offset: [f64; 3],
}

impl Default for TendonRouting {
    fn default() -> Self {
        Self {
            offset: [0.0, 0.025, 0.0],
        }
    }
}

impl TendonRouting {
    pub fn offset(&self) -> Vec3 {
        Vec3::from(self.offset)
    }
}

/// Unit tangent of the tendon path in the body frame, `(q + u x d) / |q + u x d|`.
pub fn tendon_tangent(xi: &Twist, offset: &Vec3) -> Result<Vec3> {
    let path = linear(xi) + angular(xi).cross(offset);
    let n = path.norm();
    if !(n > 1e-9) {
        return Err(Error::DegenerateTendon { norm: n, node: None });
    }
    Ok(path / n)
}

/// Wrench carried across a section by a tendon under tension `tension`:
/// moment `T d x t`, force `T t`.
///
/// This is the tendon's share of the total internal wrench, so the rod's
/// internal wrench is `K (xi - xi_ref) + actuation_wrench`.
pub fn actuation_wrench(xi: &Twist, routing: &TendonRouting, tension: f64) -> Result<Twist> {
    let d = routing.offset();
    let t = tendon_tangent(xi, &d)?;
    Ok(tension * twist(d.cross(&t), t))
}

/// Distributed weight `(0, rho A R^T g)` in the body frame, N/m.
pub fn gravity_wrench(rotation: &Mat3, mass_per_length: f64, gravity: &Vec3) -> Twist {
    twist(Vec3::zeros(), mass_per_length * (rotation.transpose() * gravity))
}

/// Spatial tip force expressed as a body-frame wrench at the tip.
pub fn tip_load_wrench(tip_rotation: &Mat3, tip_force: &Vec3) -> Twist {
    twist(Vec3::zeros(), tip_rotation.transpose() * tip_force)
}

/// Everything the semi-discrete dynamics need to know about the rod.
#[derive(Debug, Clone, PartialEq)]
pub struct RodModel {
    pub material: MaterialGeometry,
    pub sections: SectionMatrices,
    pub reference_strain: Twist,
    pub tendon: TendonRouting,
    /// m/s^2, spatial frame
    pub gravity: Vec3,
    /// Strain-rate damping, only ever non-zero in a twin's ground truth.
    pub damping: Mat6,
    /// m^2, cubic stiffening of bending and torsion: the moment gains
    /// `hardening |u - u*|^2 K1 (u - u*)`. Zero for the linear law.
    pub hardening: f64,
}

impl RodModel {
    pub fn new(material: MaterialGeometry) -> Result<Self> {
        material.validate()?;
        Ok(Self {
            material,
            sections: SectionMatrices::from_material(&material),
            reference_strain: straight_reference_strain(),
            tendon: TendonRouting::default(),
            gravity: Vec3::new(0.0, -9.81, 0.0),
            damping: Mat6::zeros(),
            hardening: 0.0,
        })
    }

    pub fn with_gravity(mut self, gravity: Vec3) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn with_tendon(mut self, tendon: TendonRouting) -> Self {
        self.tendon = tendon;
        self
    }

    /// Stiffness-proportional strain-rate damping `D = beta K`.
    pub fn with_stiffness_damping(mut self, beta: f64) -> Self {
        self.damping = beta * self.sections.stiffness;
        self
    }

    pub fn with_hardening(mut self, hardening: f64) -> Self {
        self.hardening = hardening;
        self
    }

    pub fn mass_per_length(&self) -> f64 {
        self.material.mass_per_length()
    }

    /// Total internal wrench of a section: elastic + damping + tendon.
    pub fn internal_wrench(&self, xi: &Twist, xi_rate: &Twist, tension: f64) -> Result<Twist> {
        let mut phi = elastic_wrench(xi, &self.reference_strain, &self.sections.stiffness);
        if self.hardening != 0.0 {
            let du = angular(&(xi - self.reference_strain));
            let extra = self.hardening * du.norm_squared() * (self.sections.stiffness.fixed_view::<3, 3>(0, 0) * du);
            let mut moment = phi.fixed_rows_mut::<3>(0);
            moment += extra;
        }
        if self.damping != Mat6::zeros() {
            phi += self.damping * xi_rate;
        }
        if tension != 0.0 {
            phi += actuation_wrench(xi, &self.tendon, tension)?;
        }
        Ok(phi)
    }
}
