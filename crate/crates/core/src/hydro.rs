//! Linear viscous drag: resistive-force theory for slender segments and
//! Stokes drag for beads, the head and cargo.
//!
//! Drag is linear in the relative velocity `v - u_ambient` at every Reynolds
//! number. At the fastest catch-up speeds this underestimates the real
//! resistance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::units::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fluid {
    /// kg/m³.
    pub density: f64,
    /// Pa·s.
    pub viscosity: f64,
}

impl Fluid {
    pub const WATER: Fluid = Fluid { density: 1000.0, viscosity: 1.0e-3 };
    /// Mid-range human blood viscosity.
    pub const BLOOD_MIMIC: Fluid = Fluid { density: 1200.0, viscosity: 3.5e-3 };
    /// The values used by the finite-element drag model of the prototypes.
    pub const PAPER_FEM: Fluid = Fluid { density: 1000.0, viscosity: 0.1e-3 };

    pub const PRESETS: [&'static str; 3] = ["water", "blood-mimic", "paper-fem"];

    pub fn preset(name: &str) -> Result<Fluid> {
        match name {
            "water" => Ok(Self::WATER),
            "blood-mimic" => Ok(Self::BLOOD_MIMIC),
            "paper-fem" => Ok(Self::PAPER_FEM),
            _ => Err(Error::UnknownName {
                kind: "fluid preset",
                name: name.to_owned(),
                suggestions: crate::scenario::suggest(name, &Self::PRESETS.map(String::from)),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.viscosity > 0.0) {
            return Err(domain("fluid density and viscosity must be positive"));
        }
        Ok(())
    }
}

/// Tangential and normal drag per unit length per unit velocity, Pa·s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RftCoefficients {
    pub tangential: f64,
    pub normal: f64,
}

impl RftCoefficients {
    /// Drag matrix `c_t t t^T + c_n (I - t t^T)` per unit length.
    pub fn matrix(&self, tangent: &Vec3) -> Mat3 {
        let tt = tangent * tangent.transpose();
        tt * self.tangential + (Mat3::identity() - tt) * self.normal
    }
}

/// Gray-Hancock coefficients for a body of length `length` and diameter `diameter`.
pub fn rft_coefficients(viscosity: f64, length: f64, diameter: f64) -> Result<RftCoefficients> {
    if !(diameter > 0.0) || !(length > diameter) {
        return Err(Error::Slenderness { length, diameter });
    }
    let log = (2.0 * length / diameter).ln();
    Ok(RftCoefficients {
        tangential: 2.0 * PI * viscosity / (log - 0.5),
        normal: 4.0 * PI * viscosity / (log + 0.5),
    })
}

/// Drag on a segment of length `segment_length` moving at `v_rel` relative
/// to the fluid, `tangent` a unit vector.
pub fn segment_drag(v_rel: &Vec3, tangent: &Vec3, coeffs: &RftCoefficients, segment_length: f64) -> Vec3 {
    -(coeffs.matrix(tangent) * v_rel) * segment_length
}

/// Stokes drag `-6 pi mu R v_rel`.
pub fn sphere_drag(radius: f64, v_rel: &Vec3, viscosity: f64) -> Vec3 {
    -v_rel * sphere_drag_coefficient(radius, viscosity)
}

pub fn sphere_drag_coefficient(radius: f64, viscosity: f64) -> f64 {
    6.0 * PI * viscosity * radius
}

/// A node's lumped drag `F = -(iso I + aniso t t^T)(v - u)`, kept in this
/// form so the implicit velocity update has a closed-form inverse.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeDrag {
    pub iso: f64,
    pub aniso: f64,
    pub tangent: Vec3,
}

impl NodeDrag {
    pub fn matrix(&self) -> Mat3 {
        Mat3::identity() * self.iso + self.tangent * self.tangent.transpose() * self.aniso
    }

    pub fn force(&self, v_rel: &Vec3) -> Vec3 {
        -(v_rel * self.iso + self.tangent * (self.aniso * self.tangent.dot(v_rel)))
    }

    /// Solves `(m I + dt G) v = rhs`.
    pub fn solve_implicit(&self, mass: f64, dt: f64, rhs: &Vec3) -> Vec3 {
        let a = mass + dt * self.iso;
        let b = dt * self.aniso;
        let along = self.tangent.dot(rhs);
        (rhs - self.tangent * (b / (a + b) * along)) / a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rft_example() {
        let c = rft_coefficients(1e-3, 20e-3, 100e-6).unwrap();
        assert_relative_eq!(c.tangential, 1.144e-3, epsilon = 0.001e-3);
        assert_relative_eq!(c.normal, 1.936e-3, epsilon = 0.001e-3);
        assert!(rft_coefficients(1e-3, 100e-6, 100e-6).is_err());
        let c2 = rft_coefficients(2e-3, 20e-3, 100e-6).unwrap();
        assert_relative_eq!(c2.tangential, 2.0 * c.tangential, max_relative = 1e-15);
        assert_relative_eq!(c2.normal, 2.0 * c.normal, max_relative = 1e-15);
    }

    #[test]
    fn segment_drag_examples() {
        let c = rft_coefficients(1e-3, 20e-3, 100e-6).unwrap();
        let t = Vec3::x();
        assert_eq!(segment_drag(&Vec3::zeros(), &t, &c, 0.5e-3), Vec3::zeros());
        let along = segment_drag(&Vec3::new(1e-3, 0.0, 0.0), &t, &c, 0.5e-3);
        assert_relative_eq!(along.norm(), 5.72e-10, epsilon = 0.01e-10);
        let across = segment_drag(&Vec3::new(0.0, 1e-3, 0.0), &t, &c, 0.5e-3);
        assert_relative_eq!(across.norm(), 9.68e-10, epsilon = 0.01e-10);
    }

    #[test]
    fn sphere_drag_example() {
        let f = sphere_drag(50e-6, &Vec3::new(0.0, 0.0, 1e-3), 1e-3);
        assert_relative_eq!(f.norm(), 9.425e-10, epsilon = 0.001e-10);
        assert_eq!(sphere_drag(50e-6, &Vec3::zeros(), 1e-3), Vec3::zeros());
    }

    #[test]
    fn presets_resolve() {
        assert_eq!(Fluid::preset("water").unwrap().viscosity, 1e-3);
        assert_eq!(Fluid::preset("paper-fem").unwrap().viscosity, 0.1e-3);
        assert!(matches!(Fluid::preset("watr"), Err(Error::UnknownName { .. })));
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn drag_is_dissipative_and_anisotropic(
            v in vec3(), t in vec3(), mu in 1e-4f64..1e-2, len in 1e-3f64..0.1, ratio in 2.0f64..1e4
        ) {
            prop_assume!(t.norm() > 1e-3);
            let t = t.normalize();
            let c = rft_coefficients(mu, len, len / ratio).unwrap();
            prop_assert!(c.normal >= c.tangential && c.normal < 2.0 * c.tangential);
            let f = segment_drag(&v, &t, &c, 1e-4);
            prop_assert!(f.dot(&v) <= 0.0);
            if v.norm() > 1e-9 {
                prop_assert!(f.dot(&v) < 0.0);
            }
        }

        #[test]
        fn uniform_flow_shift_leaves_drag_unchanged(v in vec3(), u in vec3(), t in vec3()) {
            prop_assume!(t.norm() > 1e-3);
            let t = t.normalize();
            let c = rft_coefficients(1e-3, 0.02, 1e-4).unwrap();
            let a = segment_drag(&(v - Vec3::zeros()), &t, &c, 1e-4);
            let b = segment_drag(&((v + u) - u), &t, &c, 1e-4);
            prop_assert!((a - b).norm() <= 1e-15 * (1.0 + a.norm()));
        }

        #[test]
        fn implicit_solve_inverts_drag_matrix(rhs in vec3(), t in vec3(), iso in 0.0f64..1.0, aniso in 0.0f64..1.0) {
            prop_assume!(t.norm() > 1e-3);
            let d = NodeDrag { iso, aniso, tangent: t.normalize() };
            let (m, dt) = (0.7, 0.3);
            let v = d.solve_implicit(m, dt, &rhs);
            let back = v * m + d.matrix() * v * dt;
            prop_assert!((back - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }
}
