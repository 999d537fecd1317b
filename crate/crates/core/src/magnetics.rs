//! Permanent-magnet fields and the wrench they exert on bead dipoles.
//!
//! The guiding magnet is modelled as a single point dipole at its centre.
//! Beads receive field but do not source it; bead-bead coupling is
//! neglected. The closed-form on-axis field of a finite cylinder is kept as
//! a calibration oracle.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::units::{Mat3, Vec3, MU0};

const MU0_OVER_4PI: f64 = 1.0e-7;

/// Axially magnetised cylindrical permanent magnet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetSource {
    pub radius: f64,
    pub height: f64,
    /// A/m.
    pub magnetization: f64,
    pub position: Vec3,
    /// Unit moment direction.
    pub axis: Vec3,
}

/// Field and its Jacobian `grad[(i, j)] = dB_i / dx_j` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub b: Vec3,
    pub grad: Mat3,
}

impl FieldSample {
    pub fn zero() -> Self {
        Self { b: Vec3::zeros(), grad: Mat3::zeros() }
    }
}

impl std::ops::Add for FieldSample {
    type Output = FieldSample;
    fn add(self, rhs: FieldSample) -> FieldSample {
        FieldSample { b: self.b + rhs.b, grad: self.grad + rhs.grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl MagnetSource {
    pub fn new(radius: f64, height: f64, magnetization: f64, position: Vec3, axis: Vec3) -> Result<Self> {
        let src = Self { radius, height, magnetization, position, axis: axis.normalize() };
        src.validate()?;
        Ok(src)
    }

    /// The 30 mm × 30 mm guiding magnet at the default 750 kA/m.
    pub fn guiding(position: Vec3, axis: Vec3) -> Self {
        Self::new(15e-3, 30e-3, 750e3, position, axis).expect("valid default magnet")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.height > 0.0 && self.magnetization > 0.0) {
            return Err(domain("magnet radius, height and magnetisation must be positive"));
        }
        if !((self.axis.norm() - 1.0).abs() < 1e-9) {
            return Err(domain("magnet axis must be a unit vector"));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius * self.height
    }

    /// `M·V`, A·m².
    pub fn dipole_moment(&self) -> f64 {
        self.magnetization * self.volume()
    }

    pub fn moment(&self) -> Vec3 {
        self.axis * self.dipole_moment()
    }

    pub fn field(&self, point: &Vec3) -> Result<Vec3> {
        dipole_field(&self.moment(), &(point - self.position))
    }

    pub fn field_gradient(&self, point: &Vec3) -> Result<Mat3> {
        dipole_field_gradient(&self.moment(), &(point - self.position))
    }

    pub fn sample(&self, point: &Vec3) -> Result<FieldSample> {
        let r = point - self.position;
        let m = self.moment();
        Ok(FieldSample { b: dipole_field(&m, &r)?, grad: dipole_field_gradient(&m, &r)? })
    }
}

/// Point-dipole field `(mu0/4pi) (3 r^ (m·r^) - m) / |r|^3` at offset `r`.
pub fn dipole_field(moment: &Vec3, r: &Vec3) -> Result<Vec3> {
    let d = r.norm();
    if !(d > 0.0) {
        return Err(Error::Singularity);
    }
    let rhat = r / d;
    Ok((3.0 * rhat * moment.dot(&rhat) - moment) * (MU0_OVER_4PI / (d * d * d)))
}

/// Analytic Jacobian of [`dipole_field`]; symmetric and traceless.
pub fn dipole_field_gradient(moment: &Vec3, r: &Vec3) -> Result<Mat3> {
    let d2 = r.norm_squared();
    if !(d2 > 0.0) {
        return Err(Error::Singularity);
    }
    let d = d2.sqrt();
    let mr = moment.dot(r);
    let c = 3.0 * MU0_OVER_4PI / (d2 * d2 * d);
    let outer = r * moment.transpose() + moment * r.transpose();
    Ok((outer + Mat3::identity() * mr - r * r.transpose() * (5.0 * mr / d2)) * c)
}

/// Superposed field of several sources.
pub fn sample_sources(sources: &[MagnetSource], point: &Vec3) -> Result<FieldSample> {
    sources.iter().try_fold(FieldSample::zero(), |acc, s| Ok(acc + s.sample(point)?))
}

/// Exact on-axis field of an axially magnetised cylinder at distance `z`
/// from its near face.
pub fn cylinder_axial_field(radius: f64, height: f64, magnetization: f64, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(domain(format!("axial distance must be non-negative, got {z}")));
    }
    let zh = z + height;
    let r2 = radius * radius;
    Ok(0.5 * MU0 * magnetization * (zh / (zh * zh + r2).sqrt() - z / (z * z + r2).sqrt()))
}

/// Outcome of fitting a magnet's magnetisation to one gaussmeter reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub magnetization: f64,
    /// Set when the measured field is zero and the fit is degenerate.
    pub degenerate: bool,
}

/// Solves `cylinder_axial_field(R, h, M, z) = B_measured` for `M` (linear in `M`).
pub fn calibrate_magnet_magnetization(radius: f64, height: f64, z: f64, b_measured: f64) -> Result<Calibration> {
    if !(b_measured >= 0.0) {
        return Err(domain(format!("measured field must be non-negative, got {b_measured}")));
    }
    let unit = cylinder_axial_field(radius, height, 1.0, z)?;
    if !(unit > 0.0) {
        return Err(domain("magnet geometry produces no axial field at this distance"));
    }
    Ok(Calibration { magnetization: b_measured / unit, degenerate: b_measured == 0.0 })
}

/// Near-face distance at which the axial field equals `level` (bisection on
/// the monotone closed form).
pub fn standoff_for_axial_field(radius: f64, height: f64, magnetization: f64, level: f64) -> Result<f64> {
    let surface = cylinder_axial_field(radius, height, magnetization, 0.0)?;
    if !(level > 0.0 && level < surface) {
        return Err(domain(format!(
            "requested axial field {level:e} T is outside (0, {surface:e}) T for this magnet"
        )));
    }
    let (mut lo, mut hi) = (0.0, radius.max(height));
    while cylinder_axial_field(radius, height, magnetization, hi)? > level {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cylinder_axial_field(radius, height, magnetization, mid)? > level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Force `(grad B)^T m` and torque `m × B` on a point dipole.
pub fn bead_wrench(moment: &Vec3, field: &FieldSample) -> Wrench {
    Wrench { force: field.grad.transpose() * moment, torque: moment.cross(&field.b) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn big_magnet() -> MagnetSource {
        MagnetSource::guiding(Vec3::zeros(), Vec3::z())
    }

    #[test]
    fn moment_matches_magnetization_times_volume() {
        let m = big_magnet();
        assert_relative_eq!(m.dipole_moment(), 15.90, epsilon = 0.01);
        assert_relative_eq!(m.dipole_moment(), m.magnetization * m.volume(), max_relative = 1e-12);
    }

    #[test]
    fn on_axis_and_equatorial_field() {
        let m = big_magnet();
        let axial = m.field(&Vec3::new(0.0, 0.0, 0.05)).unwrap();
        assert_relative_eq!(axial.norm(), 25.4e-3, epsilon = 0.05e-3);
        let side = m.field(&Vec3::new(0.05, 0.0, 0.0)).unwrap();
        assert_relative_eq!(side.norm(), 0.5 * axial.norm(), max_relative = 1e-12);
        assert!(side.dot(&m.axis) < 0.0);
        let far = m.field(&Vec3::new(0.0, 0.0, 0.10)).unwrap();
        assert_relative_eq!(far.norm(), axial.norm() / 8.0, max_relative = 1e-12);
        assert_eq!(m.field(&Vec3::zeros()), Err(Error::Singularity));
    }

    #[test]
    fn on_axis_gradient_is_minus_three_b_over_r() {
        let m = big_magnet();
        let p = Vec3::new(0.0, 0.0, 0.05);
        let g = m.field_gradient(&p).unwrap();
        let b = m.field(&p).unwrap();
        assert_relative_eq!(g[(2, 2)], -3.0 * b.z / 0.05, max_relative = 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = MagnetSource::new(5e-3, 10e-3, 1.2e6, Vec3::new(1e-3, -2e-3, 0.5e-3), Vec3::new(0.3, -0.2, 1.0)).unwrap();
        let p = Vec3::new(30e-3, 10e-3, 5e-3);
        let g = m.field_gradient(&p).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let fd = (m.field(&(p + e)).unwrap() - m.field(&(p - e)).unwrap()) / (2.0 * h);
            for i in 0..3 {
                assert!((fd[i] - g[(i, j)]).abs() <= 1e-6 * g.abs().max(), "({i},{j}) {} vs {}", fd[i], g[(i, j)]);
            }
        }
        assert!((g - g.transpose()).abs().max() <= 1e-12 * g.abs().max());
        assert!(g.trace().abs() <= 1e-9 * g.abs().max());
    }

    #[test]
    fn cylinder_axial_examples() {
        let b = cylinder_axial_field(5e-3, 10e-3, 750e3, 19e-3).unwrap();
        assert_relative_eq!(b, 8.666e-3, epsilon = 0.005e-3);
        // End face of a long rod; a wide thin disc instead tends to zero.
        let long = cylinder_axial_field(5e-3, 1e4, 750e3, 0.0).unwrap();
        assert_relative_eq!(long, 0.5 * MU0 * 750e3, max_relative = 1e-6);
        assert!(cylinder_axial_field(1e4, 10e-3, 750e3, 0.0).unwrap() < 1e-6);
        assert!(cylinder_axial_field(5e-3, 10e-3, 750e3, -1e-3).is_err());
    }

    #[test]
    fn dipole_approaches_exact_cylinder_far_away() {
        let (r, h, mag) = (5e-3, 10e-3, 750e3);
        let src = MagnetSource::new(r, h, mag, Vec3::zeros(), Vec3::z()).unwrap();
        for (factor, tol) in [(3.0, 0.05), (6.0, 0.01)] {
            let z = factor * r.max(h);
            let exact = cylinder_axial_field(r, h, mag, z).unwrap();
            let dip = src.field(&Vec3::new(0.0, 0.0, z + 0.5 * h)).unwrap().z;
            assert!(((dip - exact) / exact).abs() <= tol, "z = {factor} max(R,h): {dip} vs {exact}");
        }
    }

    #[test]
    fn calibration_examples() {
        let c = calibrate_magnet_magnetization(5e-3, 10e-3, 19e-3, 14.95e-3).unwrap();
        assert_relative_eq!(c.magnetization / 1e3, 1294.0, epsilon = 1.0);
        let b = cylinder_axial_field(5e-3, 10e-3, 750e3, 19e-3).unwrap();
        let c = calibrate_magnet_magnetization(5e-3, 10e-3, 19e-3, b).unwrap();
        assert_relative_eq!(c.magnetization, 750e3, max_relative = 1e-9);
        let c = calibrate_magnet_magnetization(5e-3, 10e-3, 19e-3, 0.0).unwrap();
        assert!(c.degenerate && c.magnetization == 0.0);
    }

    #[test]
    fn standoff_inverts_axial_field() {
        let z = standoff_for_axial_field(5e-3, 10e-3, 1.294e6, 0.43).unwrap();
        assert_relative_eq!(cylinder_axial_field(5e-3, 10e-3, 1.294e6, z).unwrap(), 0.43, max_relative = 1e-9);
        assert!(standoff_for_axial_field(5e-3, 10e-3, 750e3, 10.0).is_err());
    }

    #[test]
    fn wrench_examples() {
        let m = Vec3::new(0.0, 0.0, 2.0e-8);
        let uniform = FieldSample { b: Vec3::new(0.0, 0.0, 0.01), grad: Mat3::zeros() };
        let w = bead_wrench(&m, &uniform);
        assert_eq!(w.force, Vec3::zeros());
        assert_eq!(w.torque, Vec3::zeros());

        let perp = FieldSample { b: Vec3::new(0.01, 0.0, 0.0), grad: Mat3::zeros() };
        assert_relative_eq!(bead_wrench(&m, &perp).torque.norm(), 2.0e-10, max_relative = 1e-12);

        let src = big_magnet();
        let s = src.sample(&Vec3::new(0.0, 0.0, 0.05)).unwrap();
        let w = bead_wrench(&Vec3::new(0.0, 0.0, 2.218e-8), &s);
        assert_relative_eq!(w.force.norm(), 3.39e-8, epsilon = 0.01e-8);
    }

    #[test]
    fn superposition_is_exact() {
        let a = MagnetSource::new(5e-3, 10e-3, 1e6, Vec3::new(0.01, 0.0, 0.0), Vec3::x()).unwrap();
        let b = MagnetSource::new(3e-3, 4e-3, 8e5, Vec3::new(-0.01, 0.02, 0.0), Vec3::y()).unwrap();
        let p = Vec3::new(0.003, 0.004, 0.02);
        let sum = sample_sources(&[a, b], &p).unwrap();
        assert_eq!(sum.b, a.field(&p).unwrap() + b.field(&p).unwrap());
    }
}
