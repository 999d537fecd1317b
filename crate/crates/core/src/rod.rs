//! Internal elasticity of the discrete rod: stretching, bending, curvature
//! and the point-load cantilever oracle.
//!
//! Bending uses the discrete turning-angle curvature
//! `kappa_i = 2 tan(theta_i / 2) / lbar_i` at every interior node, with
//! energy `EI_i kappa_i^2 lbar_i / 2` and `lbar_i` the mean rest length of the
//! two adjacent edges. Forces are the exact negative gradient of that energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::robot::DiscreteRod;
use crate::units::Vec3;

/// Edges shorter than this are treated as collapsed.
pub const MIN_EDGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub time: f64,
}

impl RodState {
    /// Rest configuration, at rest, at `t = 0`.
    pub fn at_rest(rod: &DiscreteRod) -> Self {
        Self { positions: rod.rest_positions(), velocities: vec![Vec3::zeros(); rod.n_nodes()], time: 0.0 }
    }

    pub fn validate(&self, rod: &DiscreteRod) -> Result<()> {
        if self.positions.len() != rod.n_nodes() || self.velocities.len() != rod.n_nodes() {
            return Err(Error::Invalid(format!(
                "state has {} positions / {} velocities for a {}-node rod",
                self.positions.len(),
                self.velocities.len(),
                rod.n_nodes()
            )));
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !self.positions.iter().all(finite) || !self.velocities.iter().all(finite) {
            return Err(Error::Invalid("state contains non-finite entries".into()));
        }
        Ok(())
    }
}

/// Bending stiffness and Voronoi length at interior node `i`.
fn node_bending(rod: &DiscreteRod, i: usize) -> (f64, f64) {
    let a = &rod.segments[i - 1];
    let b = &rod.segments[i];
    let lbar = 0.5 * (a.rest_length + b.rest_length);
    let compliance = 0.5 * a.rest_length / a.ei + 0.5 * b.rest_length / b.ei;
    (lbar / compliance, lbar)
}

fn edge(positions: &[Vec3], i: usize) -> Result<Vec3> {
    let e = positions[i + 1] - positions[i];
    let len = e.norm();
    if len < MIN_EDGE {
        return Err(Error::DegenerateEdge { edge: i, length: len });
    }
    Ok(e)
}

/// Curvature binormal `2 (a × b) / (|a||b| + a·b)`, magnitude `2 tan(theta/2)`.
fn curvature_binormal(a: &Vec3, b: &Vec3) -> (Vec3, f64) {
    let denom = a.norm() * b.norm() + a.dot(b);
    (2.0 * a.cross(b) / denom, denom)
}

pub fn stretching_energy(rod: &DiscreteRod, positions: &[Vec3]) -> Result<f64> {
    let mut energy = 0.0;
    for (i, seg) in rod.segments.iter().enumerate() {
        let strain = edge(positions, i)?.norm() / seg.rest_length - 1.0;
        energy += 0.5 * seg.ea * strain * strain * seg.rest_length;
    }
    Ok(energy)
}

pub fn bending_energy(rod: &DiscreteRod, positions: &[Vec3]) -> Result<f64> {
    let mut energy = 0.0;
    for i in 1..rod.segments.len() {
        let (ei, lbar) = node_bending(rod, i);
        let (kb, _) = curvature_binormal(&edge(positions, i - 1)?, &edge(positions, i)?);
        energy += ei * kb.norm_squared() / (2.0 * lbar);
    }
    Ok(energy)
}

pub fn elastic_energy(rod: &DiscreteRod, positions: &[Vec3]) -> Result<f64> {
    Ok(stretching_energy(rod, positions)? + bending_energy(rod, positions)?)
}

/// Adds axial forces `EA (|e|/l0 - 1)` along every edge into `out`.
pub fn add_stretching_forces(rod: &DiscreteRod, positions: &[Vec3], out: &mut [Vec3]) -> Result<()> {
    for (i, seg) in rod.segments.iter().enumerate() {
        let e = edge(positions, i)?;
        let len = e.norm();
        let tension = seg.ea * (len / seg.rest_length - 1.0);
        let f = e * (tension / len);
        out[i] += f;
        out[i + 1] -= f;
    }
    Ok(())
}

/// Adds `-dE_bend/dx` into `out`.
pub fn add_bending_forces(rod: &DiscreteRod, positions: &[Vec3], out: &mut [Vec3]) -> Result<()> {
    for i in 1..rod.segments.len() {
        let a = edge(positions, i - 1)?;
        let b = edge(positions, i)?;
        let (kb, denom) = curvature_binormal(&a, &b);
        if denom <= 0.0 {
            // Fully folded back on itself; the energy is unbounded there.
            return Err(Error::NonFinite { term: "bending", node: i });
        }
        let (ei, lbar) = node_bending(rod, i);
        let c = ei / (2.0 * lbar);
        let k2 = kb.norm_squared();
        let (la, lb) = (a.norm(), b.norm());
        let de_da = (2.0 * b.cross(&kb) - (a * (lb / la) + b) * k2) * (2.0 * c / denom);
        let de_db = (-2.0 * a.cross(&kb) - (b * (la / lb) + a) * k2) * (2.0 * c / denom);
        out[i - 1] += de_da;
        out[i] += de_db - de_da;
        out[i + 1] -= de_db;
    }
    Ok(())
}

pub fn stretching_forces(rod: &DiscreteRod, state: &RodState) -> Result<Vec<Vec3>> {
    let mut out = vec![Vec3::zeros(); rod.n_nodes()];
    add_stretching_forces(rod, &state.positions, &mut out)?;
    Ok(out)
}

pub fn bending_forces(rod: &DiscreteRod, state: &RodState) -> Result<Vec<Vec3>> {
    let mut out = vec![Vec3::zeros(); rod.n_nodes()];
    add_bending_forces(rod, &state.positions, &mut out)?;
    Ok(out)
}

/// Tip deflection `F L^3 / (3 EI)` of a cantilever under a point end load.
pub fn cantilever_deflection(force: f64, length: f64, ei: f64) -> f64 {
    force * length.powi(3) / (3.0 * ei)
}

/// Measured curvature `2 tan(theta_i/2) / lbar_i` at every interior node,
/// with `lbar_i` from the current edge lengths.
pub fn node_curvatures(positions: &[Vec3]) -> Vec<f64> {
    if positions.len() < 3 {
        return Vec::new();
    }
    (1..positions.len() - 1)
        .map(|i| {
            let a = positions[i] - positions[i - 1];
            let b = positions[i + 1] - positions[i];
            let lbar = 0.5 * (a.norm() + b.norm());
            let (kb, denom) = curvature_binormal(&a, &b);
            if denom <= 0.0 || lbar <= 0.0 {
                f64::INFINITY
            } else {
                kb.norm() / lbar
            }
        })
        .collect()
}

/// Largest interior-node curvature, 1/m. Zero for fewer than three nodes.
pub fn max_curvature(positions: &[Vec3]) -> f64 {
    node_curvatures(positions).into_iter().fold(0.0, f64::max)
}
