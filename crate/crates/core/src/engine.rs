//! Force assembly and time integration.
//!
//! Each step evaluates the explicit forces (stretching, bending, bead
//! wrenches, wall/cargo/self contact, gravity less buoyancy) and then updates
//! velocities with the node drag treated implicitly:
//!
//! ```text
//! (m I + dt G) v' = m v + dt F + dt G u_ambient,    x' = x + dt v'
//! ```
//!
//! `G = iso I + aniso t t^T` is the lumped resistive-force-theory drag of the
//! node plus Stokes drag of any bead or head on it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::environment::{contact_force, Scene};
use crate::error::{domain, Error, Result};
use crate::hydro::{rft_coefficients, sphere_drag_coefficient, NodeDrag};
use crate::magnetics::{bead_wrench, MagnetSource};
use crate::robot::DiscreteRod;
use crate::rod::{self, RodState};
pub use crate::trajectory::{CargoState, Frame, Metrics, Trajectory};
use crate::units::{rotation_between, Vec3, GRAVITY};

/// Speed above which a run is declared unstable, m/s.
pub const MAX_SPEED: f64 = 10.0;
pub const DEFAULT_RECORD_STRIDE: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetPose {
    pub position: Vec3,
    /// Unit moment direction.
    pub axis: Vec3,
}

impl MagnetPose {
    pub fn new(position: Vec3, axis: Vec3) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !position.iter().all(|c| c.is_finite()) || !n.is_finite() {
            return Err(domain("magnet pose needs a finite position and a non-zero axis"));
        }
        // Leave unit axes untouched so a logged pose replays bit for bit.
        let axis = if (n - 1.0).abs() <= 4.0 * f64::EPSILON { axis } else { axis / n };
        Ok(Self { position, axis })
    }

    pub fn of(magnet: &MagnetSource) -> Self {
        Self { position: magnet.position, axis: magnet.axis }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Time step, s.
    pub dt: f64,
    /// Extra numerical damping rate, 1/s.
    pub damping_extra: f64,
    pub gravity_on: bool,
    /// Subtract the displaced fluid weight when gravity is on.
    pub buoyancy: bool,
    pub self_contact: bool,
    pub record_stride: u64,
    /// Pins every node and cargo body to the plane `z = value`.
    pub planar: Option<f64>,
    /// Nodes held at their initial position.
    pub fixed_nodes: Vec<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            damping_extra: 0.0,
            gravity_on: false,
            buoyancy: true,
            self_contact: false,
            record_stride: DEFAULT_RECORD_STRIDE,
            planar: None,
            fixed_nodes: Vec::new(),
        }
    }
}

/// Per-node drag coefficients precomputed from the rod geometry.
#[derive(Debug, Clone, PartialEq)]
struct NodeDragCoeffs {
    normal: f64,
    tangential: f64,
    sphere: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub rod: DiscreteRod,
    pub scene: Scene,
    pub magnet: Option<MagnetSource>,
    pub config: SimConfig,
    drag: Vec<NodeDragCoeffs>,
    bead_rest_tangents: Vec<Vec3>,
    fixed: Vec<bool>,
}

/// Largest stable step `0.5 sqrt(m_min / k_max)` with
/// `k_max = max(EA/l0, 3 EI/l0^3, k_c)`.
pub fn stability_dt(rod: &DiscreteRod, contact_stiffness: f64) -> f64 {
    let m_min = rod.nodes.iter().map(|n| n.mass).fold(f64::INFINITY, f64::min);
    let k_max = rod
        .segments
        .iter()
        .map(|s| (s.ea / s.rest_length).max(3.0 * s.ei / s.rest_length.powi(3)))
        .fold(contact_stiffness, f64::max);
    0.5 * (m_min / k_max).sqrt()
}

fn node_tangent(positions: &[Vec3], i: usize) -> Vec3 {
    let n = positions.len();
    let mut t = Vec3::zeros();
    if i > 0 {
        let e = positions[i] - positions[i - 1];
        let l = e.norm();
        if l > 0.0 {
            t += e / l;
        }
    }
    if i + 1 < n {
        let e = positions[i + 1] - positions[i];
        let l = e.norm();
        if l > 0.0 {
            t += e / l;
        }
    }
    let l = t.norm();
    if l > 1e-9 {
        t / l
    } else if i + 1 < n {
        (positions[i + 1] - positions[i]).try_normalize(0.0).unwrap_or_else(Vec3::x)
    } else {
        (positions[i] - positions[i - 1]).try_normalize(0.0).unwrap_or_else(Vec3::x)
    }
}

impl World {
    pub fn new(rod: DiscreteRod, scene: Scene, magnet: Option<MagnetSource>, config: SimConfig) -> Result<Self> {
        rod.validate()?;
        scene.validate()?;
        if let Some(m) = &magnet {
            m.validate()?;
        }
        if !(config.dt > 0.0) {
            return Err(domain(format!("dt must be positive, got {}", config.dt)));
        }
        if !(config.damping_extra >= 0.0) {
            return Err(domain("damping_extra must be non-negative"));
        }
        if config.record_stride == 0 {
            return Err(domain("record_stride must be at least 1"));
        }
        let limit = stability_dt(&rod, scene.contact_stiffness);
        if config.dt > limit {
            return Err(Error::TimeStepTooLarge { dt: config.dt, limit });
        }
        let n = rod.n_nodes();
        let mut fixed = vec![false; n];
        for &i in &config.fixed_nodes {
            if i >= n {
                return Err(domain(format!("fixed node {i} out of range for a {n}-node rod")));
            }
            fixed[i] = true;
        }
        let mu = scene.fluid.viscosity;
        let mut drag = vec![NodeDragCoeffs { normal: 0.0, tangential: 0.0, sphere: 0.0 }; n];
        for (i, seg) in rod.segments.iter().enumerate() {
            let c = rft_coefficients(mu, rod.length, seg.drag_diameter)?;
            for j in [i, i + 1] {
                drag[j].normal += 0.5 * seg.rest_length * c.normal;
                drag[j].tangential += 0.5 * seg.rest_length * c.tangential;
            }
        }
        for (d, node) in drag.iter_mut().zip(&rod.nodes) {
            d.sphere = sphere_drag_coefficient(node.drag_radius, mu);
        }
        let rest = rod.rest_positions();
        let bead_rest_tangents = rod.beads.iter().map(|b| node_tangent(&rest, b.node)).collect();
        Ok(Self { rod, scene, magnet, config, drag, bead_rest_tangents, fixed })
    }

    /// Builds the world with `dt` set to the stability limit.
    pub fn with_stable_dt(rod: DiscreteRod, scene: Scene, magnet: Option<MagnetSource>, mut config: SimConfig) -> Result<Self> {
        config.dt = stability_dt(&rod, scene.contact_stiffness);
        Self::new(rod, scene, magnet, config)
    }

    pub fn stability_dt(&self) -> f64 {
        stability_dt(&self.rod, self.scene.contact_stiffness)
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed[i]
    }

    pub fn set_magnet_pose(&mut self, pose: &MagnetPose) {
        if let Some(m) = &mut self.magnet {
            m.position = pose.position;
            m.axis = pose.axis;
        }
    }

    pub fn magnet_pose(&self) -> MagnetPose {
        self.magnet.as_ref().map(MagnetPose::of).unwrap_or(MagnetPose { position: Vec3::zeros(), axis: Vec3::z() })
    }

    pub fn initial_state(&self) -> SimState {
        let mut rod_state = RodState::at_rest(&self.rod);
        if let Some(z) = self.config.planar {
            for p in &mut rod_state.positions {
                p.z = z;
            }
        }
        let cargo = self
            .scene
            .cargo
            .iter()
            .map(|c| {
                let mut position = c.position;
                if let Some(z) = self.config.planar {
                    position.z = z;
                }
                CargoState { position, velocity: c.velocity }
            })
            .collect();
        SimState { rod: rod_state, cargo, step: 0 }
    }

    /// Current magnetic moment of every bead (body frame carried by the local tangent).
    pub fn bead_moments(&self, positions: &[Vec3]) -> Vec<Vec3> {
        self.rod
            .beads
            .iter()
            .zip(&self.bead_rest_tangents)
            .map(|(b, t0)| {
                let t = node_tangent(positions, b.node);
                rotation_between(t0, &t) * b.magnetization_dir_body * b.dipole_magnitude
            })
            .collect()
    }

    /// Adds the bead forces and torque couples, scaled by `scale`.
    fn add_magnetic_forces(&self, positions: &[Vec3], scale: f64, out: &mut [Vec3]) -> Result<()> {
        let Some(magnet) = &self.magnet else { return Ok(()) };
        let n = positions.len();
        for (b, m) in self.rod.beads.iter().zip(self.bead_moments(positions)) {
            let i = b.node;
            let sample = magnet.sample(&positions[i])?;
            let w = bead_wrench(&m, &sample);
            out[i] += w.force * scale;
            let (a, c) = if i == 0 {
                (0, 1)
            } else if i + 1 == n {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let d = positions[c] - positions[a];
            let d2 = d.norm_squared();
            if d2 > 0.0 {
                let f = w.torque.cross(&d) / d2 * scale;
                out[c] += f;
                out[a] -= f;
            }
        }
        Ok(())
    }

    fn add_gravity(&self, scale: f64, out: &mut [Vec3]) {
        let rho = if self.config.buoyancy { self.scene.fluid.density } else { 0.0 };
        for (f, node) in out.iter_mut().zip(&self.rod.nodes) {
            f.z -= (node.mass - rho * node.volume) * GRAVITY * scale;
        }
    }

    fn add_wall_contact(&self, state: &SimState, out: &mut [Vec3]) {
        let params = self.scene.contact_params();
        for (i, node) in self.rod.nodes.iter().enumerate() {
            let p = &state.rod.positions[i];
            let sample = self.scene.sdf_eval(p);
            if sample.distance < node.contact_radius {
                out[i] += contact_force(sample.distance, &sample.normal, &state.rod.velocities[i], node.contact_radius, &params);
            }
        }
    }

    fn segment_radius(&self, s: usize) -> f64 {
        self.rod.nodes[s].contact_radius.max(self.rod.nodes[s + 1].contact_radius)
    }

    fn add_self_contact(&self, positions: &[Vec3], out: &mut [Vec3]) {
        let k = self.scene.contact_stiffness;
        let ns = self.rod.segments.len();
        for i in 0..ns {
            let (p0, p1) = (positions[i], positions[i + 1]);
            let ri = self.segment_radius(i);
            for j in i + 2..ns {
                let (q0, q1) = (positions[j], positions[j + 1]);
                let rj = self.segment_radius(j);
                let reach = 0.5 * ((p1 - p0).norm() + (q1 - q0).norm()) + ri + rj;
                if (0.5 * (p0 + p1) - 0.5 * (q0 + q1)).norm_squared() > reach * reach {
                    continue;
                }
                let (s, t) = closest_segment_params(&p0, &p1, &q0, &q1);
                let a = p0 + (p1 - p0) * s;
                let b = q0 + (q1 - q0) * t;
                let d = a - b;
                let dist = d.norm();
                let pen = ri + rj - dist;
                if pen > 0.0 && dist > 0.0 {
                    let f = d / dist * (k * pen);
                    out[i] += f * (1.0 - s);
                    out[i + 1] += f * s;
                    out[j] -= f * (1.0 - t);
                    out[j + 1] -= f * t;
                }
            }
        }
    }

    fn add_cargo_forces(&self, state: &SimState, out: &mut [Vec3], cargo_out: &mut [Vec3]) {
        let params = self.scene.contact_params();
        let rho = self.scene.fluid.density;
        for (k, (body, cs)) in self.scene.cargo.iter().zip(&state.cargo).enumerate() {
            let c = &cs.position;
            let sample = self.scene.sdf_eval(c);
            if sample.distance < body.radius {
                cargo_out[k] += contact_force(sample.distance, &sample.normal, &cs.velocity, body.radius, &params);
            }
            if self.config.gravity_on {
                let buoy = if self.config.buoyancy { rho * body.volume() } else { 0.0 };
                cargo_out[k].z -= (body.mass - buoy) * GRAVITY;
            }
            for (i, node) in self.rod.nodes.iter().enumerate() {
                let r = state.rod.positions[i] - c;
                let dist = r.norm();
                let reach = body.radius + node.contact_radius;
                if dist < reach && dist > 0.0 {
                    let n = r / dist;
                    let rel = state.rod.velocities[i] - cs.velocity;
                    let f = contact_force(dist - body.radius, &n, &rel, node.contact_radius, &params);
                    out[i] += f;
                    cargo_out[k] -= f;
                }
            }
        }
    }

    /// Every force except drag; fills `out` (per node) and `cargo_out`.
    fn explicit_forces(&self, state: &SimState, out: &mut [Vec3], cargo_out: &mut [Vec3]) -> Result<()> {
        out.iter_mut().for_each(|f| *f = Vec3::zeros());
        cargo_out.iter_mut().for_each(|f| *f = Vec3::zeros());
        let pos = &state.rod.positions;
        rod::add_stretching_forces(&self.rod, pos, out)?;
        check_finite(out, "stretching")?;
        rod::add_bending_forces(&self.rod, pos, out)?;
        check_finite(out, "bending")?;
        self.add_magnetic_forces(pos, 1.0, out)?;
        check_finite(out, "magnetic")?;
        self.add_wall_contact(state, out);
        if self.config.self_contact {
            self.add_self_contact(pos, out);
        }
        self.add_cargo_forces(state, out, cargo_out);
        check_finite(out, "contact")?;
        check_finite(cargo_out, "cargo")?;
        if self.config.gravity_on {
            self.add_gravity(1.0, out);
            check_finite(out, "gravity")?;
        }
        Ok(())
    }

    fn node_drag(&self, positions: &[Vec3], i: usize) -> NodeDrag {
        let c = &self.drag[i];
        NodeDrag {
            iso: c.normal + c.sphere + self.config.damping_extra * self.rod.nodes[i].mass,
            aniso: c.tangential - c.normal,
            tangent: node_tangent(positions, i),
        }
    }

    /// Total force on every node and cargo body at the current velocities.
    pub fn assemble_forces(&self, state: &SimState) -> Result<AssembledForces> {
        state.rod.validate(&self.rod)?;
        let mut nodes = vec![Vec3::zeros(); self.rod.n_nodes()];
        let mut cargo = vec![Vec3::zeros(); state.cargo.len()];
        self.explicit_forces(state, &mut nodes, &mut cargo)?;
        for (i, f) in nodes.iter_mut().enumerate() {
            let p = &state.rod.positions[i];
            let g = self.node_drag(&state.rod.positions, i);
            *f += g.force(&(state.rod.velocities[i] - self.scene.ambient_flow(p)));
        }
        for (k, f) in cargo.iter_mut().enumerate() {
            let cs = &state.cargo[k];
            let c = sphere_drag_coefficient(self.scene.cargo[k].radius, self.scene.fluid.viscosity);
            *f -= (cs.velocity - self.scene.ambient_flow(&cs.position)) * c;
        }
        check_finite(&nodes, "drag")?;
        Ok(AssembledForces { nodes, cargo })
    }

    /// Kinetic plus elastic energy (plus gravitational potential when on), J.
    pub fn mechanical_energy(&self, state: &SimState) -> Result<f64> {
        let mut e = rod::elastic_energy(&self.rod, &state.rod.positions)?;
        let rho = if self.config.buoyancy { self.scene.fluid.density } else { 0.0 };
        for (node, (v, p)) in self.rod.nodes.iter().zip(state.rod.velocities.iter().zip(&state.rod.positions)) {
            e += 0.5 * node.mass * v.norm_squared();
            if self.config.gravity_on {
                e += (node.mass - rho * node.volume) * GRAVITY * p.z;
            }
        }
        for (body, cs) in self.scene.cargo.iter().zip(&state.cargo) {
            e += 0.5 * body.mass * cs.velocity.norm_squared();
        }
        Ok(e)
    }

    /// One semi-implicit Euler step of length `dt` (at most `config.dt`).
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let mut next = state.clone();
        let mut scratch = Scratch::new(self);
        self.step_in_place(&mut next, dt, &mut scratch)?;
        Ok(next)
    }

    fn step_in_place(&self, state: &mut SimState, dt: f64, scratch: &mut Scratch) -> Result<()> {
        if !(dt > 0.0 && dt <= self.config.dt) {
            return Err(domain(format!("step dt {dt:e} must be in (0, {:e}]", self.config.dt)));
        }
        self.explicit_forces(state, &mut scratch.forces, &mut scratch.cargo)?;
        let planar = self.config.planar;
        let mut fastest = 0.0f64;
        for i in 0..self.rod.n_nodes() {
            if self.fixed[i] {
                state.rod.velocities[i] = Vec3::zeros();
                continue;
            }
            let m = self.rod.nodes[i].mass;
            let p = state.rod.positions[i];
            let g = self.node_drag(&state.rod.positions, i);
            let mut f = scratch.forces[i];
            let u = self.scene.ambient_flow(&p);
            if !self.scene.ambient_flow.is_none() {
                f += g.matrix() * u;
            }
            let rhs = state.rod.velocities[i] * m + f * dt;
            let mut v = g.solve_implicit(m, dt, &rhs);
            if planar.is_some() {
                v.z = 0.0;
            }
            fastest = fastest.max(v.norm());
            scratch.velocities[i] = v;
        }
        for i in 0..self.rod.n_nodes() {
            if !self.fixed[i] {
                state.rod.velocities[i] = scratch.velocities[i];
                state.rod.positions[i] += scratch.velocities[i] * dt;
            }
        }
        for (k, cs) in state.cargo.iter_mut().enumerate() {
            let body = &self.scene.cargo[k];
            let c = sphere_drag_coefficient(body.radius, self.scene.fluid.viscosity);
            let u = self.scene.ambient_flow(&cs.position);
            let mut v = (cs.velocity * body.mass + (scratch.cargo[k] + u * c) * dt) / (body.mass + c * dt);
            if planar.is_some() {
                v.z = 0.0;
            }
            fastest = fastest.max(v.norm());
            cs.velocity = v;
            cs.position += v * dt;
        }
        state.step += 1;
        state.rod.time = state.step as f64 * self.config.dt;
        if !(fastest <= MAX_SPEED) {
            return Err(Error::Unstable { step: state.step, speed: fastest });
        }
        Ok(())
    }

    /// Frame metrics: max curvature, head speed, horizontal head-magnet gap, |B| at head.
    pub fn frame_metrics(&self, state: &SimState) -> (f64, f64, f64, f64) {
        let head = self.rod.head_node();
        let hp = state.rod.positions[head];
        let kappa = rod::max_curvature(&state.rod.positions);
        let speed = state.rod.velocities[head].norm();
        let (gap, b) = match &self.magnet {
            Some(m) => {
                let d = hp - m.position;
                (d.xy().norm(), m.field(&hp).map(|b| b.norm()).unwrap_or(f64::INFINITY))
            }
            None => (f64::INFINITY, 0.0),
        };
        (kappa, speed, gap, b)
    }

    pub fn frame(&self, state: &SimState) -> Frame {
        Frame {
            t: state.time(),
            positions: state.rod.positions.clone(),
            velocities: state.rod.velocities.clone(),
            magnet: self.magnet_pose(),
            cargo: state.cargo.clone(),
        }
    }
}

fn check_finite(forces: &[Vec3], term: &'static str) -> Result<()> {
    match forces.iter().position(|f| !f.iter().all(|c| c.is_finite())) {
        Some(node) => Err(Error::NonFinite { term, node }),
        None => Ok(()),
    }
}

/// Parameters of the closest points between segments `p0p1` and `q0q1`.
pub fn closest_segment_params(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> (f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    if a <= 1e-30 && e <= 1e-30 {
        return (0.0, 0.0);
    }
    if a <= 1e-30 {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= 1e-30 {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-30 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledForces {
    pub nodes: Vec<Vec3>,
    pub cargo: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub rod: RodState,
    pub cargo: Vec<CargoState>,
    pub step: u64,
}

impl SimState {
    pub fn time(&self) -> f64 {
        self.rod.time
    }
}

struct Scratch {
    forces: Vec<Vec3>,
    velocities: Vec<Vec3>,
    cargo: Vec<Vec3>,
}

impl Scratch {
    fn new(world: &World) -> Self {
        let n = world.rod.n_nodes();
        Self { forces: vec![Vec3::zeros(); n], velocities: vec![Vec3::zeros(); n], cargo: vec![Vec3::zeros(); world.scene.cargo.len()] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub pose: MagnetPose,
}

/// Piecewise-linear magnet motion; the axis is re-normalised after interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedPath {
    waypoints: Vec<Waypoint>,
}

impl ScriptedPath {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(domain("a scripted path needs at least one waypoint"));
        }
        for w in waypoints.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(domain("waypoint times must be strictly increasing"));
            }
        }
        let waypoints = waypoints
            .into_iter()
            .map(|w| Ok(Waypoint { t: w.t, pose: MagnetPose::new(w.pose.position, w.pose.axis)? }))
            .collect::<Result<_>>()?;
        Ok(Self { waypoints })
    }

    pub fn stationary(pose: MagnetPose) -> Self {
        Self { waypoints: vec![Waypoint { t: 0.0, pose }] }
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn pose_at(&self, t: f64) -> MagnetPose {
        let w = &self.waypoints;
        let k = w.partition_point(|p| p.t <= t);
        if k == 0 {
            return w[0].pose;
        }
        if k == w.len() {
            return w[k - 1].pose;
        }
        let (a, b) = (&w[k - 1], &w[k]);
        let s = (t - a.t) / (b.t - a.t);
        let position = a.pose.position + (b.pose.position - a.pose.position) * s;
        let axis = a.pose.axis + (b.pose.axis - a.pose.axis) * s;
        let axis = axis.try_normalize(0.0).unwrap_or(a.pose.axis);
        MagnetPose { position, axis }
    }
}

/// Magnet held at `position` whose moment spins about `spin_axis` at `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatingField {
    pub position: Vec3,
    pub initial_axis: Vec3,
    pub spin_axis: Vec3,
    /// rad/s.
    pub omega: f64,
}

impl RotatingField {
    pub fn pose_at(&self, t: f64) -> MagnetPose {
        let k = self.spin_axis.normalize();
        let v = self.initial_axis.normalize();
        let (s, c) = (self.omega * t).sin_cos();
        let axis = v * c + k.cross(&v) * s + k * (k.dot(&v) * (1.0 - c));
        MagnetPose { position: self.position, axis: axis.normalize() }
    }
}

/// A magnet pose applied at the start of a given step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoggedCommand {
    pub step: u64,
    pub pos: [f64; 3],
    pub axis: [f64; 3],
}

/// The command log written by the teleoperation recorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandLog {
    pub schema: String,
    pub scenario: String,
    pub dt: f64,
    pub steps: u64,
    pub commands: Vec<LoggedCommand>,
}

impl CommandLog {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let log: CommandLog = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            pointer: crate::scenario::json_pointer(e.path()),
            message: e.inner().to_string(),
        })?;
        if log.schema != "1" {
            return Err(Error::Schema { pointer: "/schema".into(), message: format!("unsupported schema {:?}", log.schema) });
        }
        for (k, w) in log.commands.windows(2).enumerate() {
            if w[1].step < w[0].step {
                return Err(Error::Schema {
                    pointer: format!("/commands/{}/step", k + 1),
                    message: "command steps must be non-decreasing".into(),
                });
            }
        }
        Ok(log)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("command log serialises")
    }
}

/// Magnet poses applied at step granularity, either live (teleoperation) or
/// replayed from a [`CommandLog`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalController {
    current: MagnetPose,
    pending: VecDeque<(u64, MagnetPose)>,
    log: Vec<LoggedCommand>,
}

impl ExternalController {
    pub fn new(initial: MagnetPose) -> Self {
        Self { current: initial, pending: VecDeque::new(), log: Vec::new() }
    }

    pub fn from_log(initial: MagnetPose, log: &CommandLog) -> Result<Self> {
        let mut c = Self::new(initial);
        for cmd in &log.commands {
            let pose = MagnetPose::new(Vec3::from(cmd.pos), Vec3::from(cmd.axis))?;
            c.pending.push_back((cmd.step, pose));
        }
        Ok(c)
    }

    /// Queues `pose` for the start of step `step`. Steps must not go backwards.
    pub fn push(&mut self, step: u64, pose: MagnetPose) -> Result<()> {
        let pose = MagnetPose::new(pose.position, pose.axis)?;
        if let Some(last) = self.log.last() {
            if step < last.step {
                return Err(domain("external commands must not go back in time"));
            }
        }
        self.pending.push_back((step, pose));
        self.log.push(LoggedCommand { step, pos: pose.position.into(), axis: pose.axis.into() });
        Ok(())
    }

    /// The pose in force before any pending command is applied.
    pub fn current(&self) -> MagnetPose {
        self.current
    }

    pub fn clear_log(&mut self) {
        self.log.clear();
    }

    pub fn logged(&self) -> &[LoggedCommand] {
        &self.log
    }

    pub fn pose_at_step(&mut self, step: u64) -> MagnetPose {
        while let Some(&(s, pose)) = self.pending.front() {
            if s > step {
                break;
            }
            self.current = pose;
            self.pending.pop_front();
        }
        self.current
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    ScriptedPath(ScriptedPath),
    External(ExternalController),
    RotatingField(RotatingField),
}

impl Controller {
    /// Magnet pose for the step starting at `step` (time `t`).
    pub fn pose(&mut self, step: u64, t: f64) -> MagnetPose {
        match self {
            Controller::ScriptedPath(p) => p.pose_at(t),
            Controller::External(e) => e.pose_at_step(step),
            Controller::RotatingField(r) => r.pose_at(t),
        }
    }
}

/// A world, its state and a controller, advanced step by step.
#[derive(Debug)]
pub struct Simulation {
    pub world: World,
    pub state: SimState,
    pub controller: Controller,
    scratch: Vec<Vec3>,
    scratch_v: Vec<Vec3>,
    scratch_c: Vec<Vec3>,
}

impl Simulation {
    pub fn new(world: World, controller: Controller) -> Self {
        let state = world.initial_state();
        Self::from_state(world, state, controller)
    }

    pub fn from_state(mut world: World, state: SimState, mut controller: Controller) -> Self {
        // External commands queued for this step take effect when it runs,
        // so the first frame shows the same pose live and on replay.
        let pose = match &controller {
            Controller::External(e) => e.current(),
            _ => controller.pose(state.step, state.time()),
        };
        world.set_magnet_pose(&pose);
        let n = world.rod.n_nodes();
        let nc = world.scene.cargo.len();
        Self { world, state, controller, scratch: vec![Vec3::zeros(); n], scratch_v: vec![Vec3::zeros(); n], scratch_c: vec![Vec3::zeros(); nc] }
    }

    pub fn step(&mut self) -> Result<()> {
        let pose = self.controller.pose(self.state.step, self.state.time());
        self.world.set_magnet_pose(&pose);
        let mut scratch = Scratch {
            forces: std::mem::take(&mut self.scratch),
            velocities: std::mem::take(&mut self.scratch_v),
            cargo: std::mem::take(&mut self.scratch_c),
        };
        let dt = self.world.config.dt;
        let result = self.world.step_in_place(&mut self.state, dt, &mut scratch);
        self.scratch = scratch.forces;
        self.scratch_v = scratch.velocities;
        self.scratch_c = scratch.cargo;
        result.map_err(|e| Error::AtTime { time: self.state.time(), source: Box::new(e) })
    }

    pub fn frame(&self) -> Frame {
        self.world.frame(&self.state)
    }

    pub fn record(&self, traj: &mut Trajectory) {
        traj.frames.push(self.frame());
        let (k, s, g, b) = self.world.frame_metrics(&self.state);
        traj.metrics.kappa_max.push(k);
        traj.metrics.head_speed.push(s);
        traj.metrics.gap.push(g);
        traj.metrics.b_at_head.push(b);
    }

    /// Runs `steps` steps, recording every `record_stride` and the final step.
    pub fn run_steps(&mut self, steps: u64) -> Result<Trajectory> {
        let stride = self.world.config.record_stride;
        let mut traj = Trajectory::default();
        self.record(&mut traj);
        for k in 1..=steps {
            self.step()?;
            if k % stride == 0 || k == steps {
                self.record(&mut traj);
            }
        }
        Ok(traj)
    }
}

/// Number of steps covering `duration`: `ceil(duration / dt)`.
pub fn steps_for(duration: f64, dt: f64) -> u64 {
    let raw = duration / dt;
    let r = raw.round();
    if (raw - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        raw.ceil() as u64
    }
}

/// Runs from the world's initial state for `duration` seconds.
pub fn run(world: &World, controller: &Controller, duration: f64) -> Result<Trajectory> {
    if !(duration >= 0.0) {
        return Err(domain("duration must be non-negative"));
    }
    let mut sim = Simulation::new(world.clone(), controller.clone());
    sim.run_steps(steps_for(duration, world.config.dt))
}

/// Options of the static equilibrium solver.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticOptions {
    /// Constant nodal loads applied alongside the magnet, N.
    pub loads: Vec<Vec3>,
    pub include_magnet: bool,
    /// Load increments from 0 to full load.
    pub load_steps: usize,
    pub max_iterations: usize,
    /// Converged once the largest free-node force is below `rel_tol` times the load scale.
    pub rel_tol: f64,
}

impl Default for StaticOptions {
    fn default() -> Self {
        Self { loads: Vec::new(), include_magnet: true, load_steps: 8, max_iterations: 60, rel_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    pub positions: Vec<Vec3>,
    /// Largest free-node force magnitude at the solution, N.
    pub residual: f64,
    pub load_scale: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl World {
    fn static_forces(&self, positions: &[Vec3], opts: &StaticOptions, lambda: f64, out: &mut [Vec3]) -> Result<()> {
        out.iter_mut().for_each(|f| *f = Vec3::zeros());
        rod::add_stretching_forces(&self.rod, positions, out)?;
        rod::add_bending_forces(&self.rod, positions, out)?;
        if opts.include_magnet {
            self.add_magnetic_forces(positions, lambda, out)?;
        }
        if self.config.gravity_on {
            self.add_gravity(lambda, out);
        }
        for (f, l) in out.iter_mut().zip(&opts.loads) {
            *f += l * lambda;
        }
        check_finite(out, "static")
    }

    /// Static equilibrium by Newton's method with a coloured finite-difference
    /// Jacobian, backtracking line search and load continuation. Nodes in
    /// `config.fixed_nodes` stay at their `initial` positions; contact and
    /// drag are ignored.
    pub fn solve_static(&self, initial: &[Vec3], opts: &StaticOptions) -> Result<StaticSolution> {
        use nalgebra::{DMatrix, DVector};
        let n = self.rod.n_nodes();
        if initial.len() != n {
            return Err(domain("initial positions do not match the rod"));
        }
        let free: Vec<usize> = (0..n).filter(|&i| !self.fixed[i]).collect();
        let dim = 3 * free.len();
        let mut pos = initial.to_vec();
        let mut forces = vec![Vec3::zeros(); n];

        // Load scale: external forces at full load in the initial shape.
        let mut probe = vec![Vec3::zeros(); n];
        if opts.include_magnet {
            self.add_magnetic_forces(initial, 1.0, &mut probe)?;
        }
        if self.config.gravity_on {
            self.add_gravity(1.0, &mut probe);
        }
        for (f, l) in probe.iter_mut().zip(&opts.loads) {
            *f += l;
        }
        let load_scale = probe.iter().map(|f| f.norm()).fold(0.0, f64::max);
        // Stretching forces carry roundoff of order eps * EA, far above
        // rel_tol * load for soft loads on stiff fibres.
        let max_ea = self.rod.segments.iter().map(|s| s.ea).fold(0.0, f64::max);
        let tol = (opts.rel_tol * load_scale).max(1e4 * f64::EPSILON * max_ea).max(1e-300);

        let residual = |pos: &[Vec3], lambda: f64, forces: &mut [Vec3]| -> Result<DVector<f64>> {
            self.static_forces(pos, opts, lambda, forces)?;
            let mut r = DVector::zeros(dim);
            for (k, &i) in free.iter().enumerate() {
                for c in 0..3 {
                    r[3 * k + c] = forces[i][c];
                }
            }
            Ok(r)
        };
        let max_norm = |r: &DVector<f64>| (0..r.len() / 3).map(|k| r.fixed_rows::<3>(3 * k).norm()).fold(0.0, f64::max);

        let min_len = self.rod.segments.iter().map(|s| s.rest_length).fold(f64::INFINITY, f64::min);
        let h = 1e-6 * min_len;
        const COLORS: usize = 7;
        let mut iterations = 0;
        let mut converged = true;
        let mut last_res = 0.0;
        let steps = opts.load_steps.max(1);
        for stage in 1..=steps {
            let lambda = stage as f64 / steps as f64;
            let mut r = residual(&pos, lambda, &mut forces)?;
            for _ in 0..opts.max_iterations {
                if max_norm(&r) <= tol {
                    break;
                }
                iterations += 1;
                let mut jac = DMatrix::<f64>::zeros(dim, dim);
                for color in 0..COLORS {
                    for c in 0..3 {
                        let group: Vec<usize> = (0..free.len()).filter(|k| free[*k] % COLORS == color).collect();
                        if group.is_empty() {
                            continue;
                        }
                        let mut plus = pos.clone();
                        let mut minus = pos.clone();
                        for &k in &group {
                            plus[free[k]][c] += h;
                            minus[free[k]][c] -= h;
                        }
                        let rp = residual(&plus, lambda, &mut forces)?;
                        let rm = residual(&minus, lambda, &mut forces)?;
                        for &k in &group {
                            let col = 3 * k + c;
                            let node = free[k];
                            // rows influenced by this node: within +-3 neighbours
                            for (kk, &other) in free.iter().enumerate() {
                                if other.abs_diff(node) <= 3 {
                                    for cc in 0..3 {
                                        let row = 3 * kk + cc;
                                        jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
                                    }
                                }
                            }
                        }
                    }
                }
                let lu = jac.lu();
                let Some(delta) = lu.solve(&(-&r)) else {
                    return Err(Error::Singularity);
                };
                // Natural monotonicity test: the simplified Newton correction
                // at the trial point must shrink. A plain residual norm mixes
                // stiff axial and soft bending rows and stalls.
                let dnorm = delta.norm();
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..30 {
                    let mut trial = pos.clone();
                    for (k, &i) in free.iter().enumerate() {
                        for c in 0..3 {
                            trial[i][c] += alpha * delta[3 * k + c];
                        }
                    }
                    if let Ok(rt) = residual(&trial, lambda, &mut forces) {
                        let simplified = lu.solve(&(-&rt)).map(|d| d.norm()).unwrap_or(f64::INFINITY);
                        if simplified <= (1.0 - 0.25 * alpha) * dnorm || max_norm(&rt) <= tol {
                            pos = trial;
                            r = rt;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            last_res = max_norm(&r);
            converged = last_res <= tol;
        }
        Ok(StaticSolution { positions: pos, residual: last_res, load_scale, converged, iterations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{tank, CargoBody};
    use crate::fabrication::{paper_design, Variant};
    use crate::robot::discretize;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fibre(n: usize) -> DiscreteRod {
        DiscreteRod::uniform(15e-3, 100e-6, 22e6, 1000.0, n).unwrap()
    }

    fn world(rod: DiscreteRod, magnet: Option<MagnetSource>) -> World {
        World::with_stable_dt(rod, tank(), magnet, SimConfig::default()).unwrap()
    }

    #[test]
    fn rest_without_magnet_has_no_force() {
        let w = world(fibre(20), None);
        let f = w.assemble_forces(&w.initial_state()).unwrap();
        let ea = w.rod.segments[0].ea;
        assert!(f.nodes.iter().all(|f| f.norm() <= 1e-12 * ea));
    }

    #[test]
    fn single_bead_force_matches_wrench() {
        let design = paper_design(Variant::FiberBigHead);
        let rod = discretize(&design, 0.5e-3).unwrap();
        let magnet = MagnetSource::guiding(Vec3::new(15e-3, 0.0, 20e-3), Vec3::z());
        let w = world(rod, Some(magnet));
        let state = w.initial_state();
        let mut stretch_bend = vec![Vec3::zeros(); w.rod.n_nodes()];
        rod::add_stretching_forces(&w.rod, &state.rod.positions, &mut stretch_bend).unwrap();
        let total = w.assemble_forces(&state).unwrap();
        let head = w.rod.head_node();
        let m = w.bead_moments(&state.rod.positions)[0];
        let sample = w.magnet.as_ref().unwrap().sample(&state.rod.positions[head]).unwrap();
        let wrench = bead_wrench(&m, &sample);
        // head receives the force plus half of the couple
        let d = state.rod.positions[head] - state.rod.positions[head - 1];
        let couple = wrench.torque.cross(&d) / d.norm_squared();
        assert!((total.nodes[head] - wrench.force - couple).norm() <= 1e-12 * wrench.force.norm().max(couple.norm()));
    }

    #[test]
    fn couple_reproduces_perpendicular_torque() {
        let design = paper_design(Variant::BoasBigHead);
        let rod = discretize(&design, 0.5e-3).unwrap();
        let magnet = MagnetSource::guiding(Vec3::new(7e-3, 3e-3, 20e-3), Vec3::new(1.0, 1.0, 1.0));
        let w = world(rod, Some(magnet));
        let pos = w.rod.rest_positions();
        let mut out = vec![Vec3::zeros(); pos.len()];
        w.add_magnetic_forces(&pos, 1.0, &mut out).unwrap();
        let moments = w.bead_moments(&pos);
        let (mut force, mut torque) = (Vec3::zeros(), Vec3::zeros());
        for (b, m) in w.rod.beads.iter().zip(&moments) {
            let s = w.magnet.as_ref().unwrap().sample(&pos[b.node]).unwrap();
            let wr = bead_wrench(m, &s);
            force += wr.force;
            torque += wr.torque + pos[b.node].cross(&wr.force);
        }
        let sum: Vec3 = out.iter().sum();
        let moment: Vec3 = out.iter().zip(&pos).map(|(f, p)| p.cross(f)).sum();
        assert!((sum - force).norm() <= 1e-12 * force.norm());
        // straight rod along x: the axial (x) torque cannot be carried by node forces
        assert!((moment.yz() - torque.yz()).norm() <= 1e-9 * torque.norm());
    }

    #[test]
    fn zero_force_is_uniform_motion() {
        let mut rod = fibre(12);
        // drag-free medium
        let mut scene = tank();
        scene.fluid.viscosity = 1e-300;
        for s in &mut rod.segments {
            s.drag_diameter = 1e-6;
        }
        let w = World::with_stable_dt(rod, scene, None, SimConfig::default()).unwrap();
        let mut s = w.initial_state();
        let v = Vec3::new(1e-3, -2e-3, 0.5e-3);
        s.rod.velocities.iter_mut().for_each(|u| *u = v);
        let next = w.step(&s, w.config.dt).unwrap();
        for (a, b) in next.rod.positions.iter().zip(&s.rod.positions) {
            assert!((a - b - v * w.config.dt).norm() < 1e-18);
        }
    }

    #[test]
    fn stability_dt_square_root_law() {
        let rod = fibre(30);
        let mut stiff = rod.clone();
        stiff.segments.iter_mut().for_each(|s| s.ea *= 4.0);
        let a = stability_dt(&rod, 10.0);
        let b = stability_dt(&stiff, 10.0);
        assert_relative_eq!(b, 0.5 * a, max_relative = 1e-12);
        assert!(stability_dt(&rod, 1e30) < 1e-12);
    }

    #[test]
    fn reference_scale_stability_probe() {
        let design = paper_design(Variant::BoasBigHead);
        let rod = discretize(&design, 0.5e-3).unwrap();
        let w = world(rod, None);
        assert!((1e-7..=1e-4).contains(&w.config.dt), "{}", w.config.dt);
        let mut sim = Simulation::new(w, Controller::ScriptedPath(ScriptedPath::stationary(MagnetPose { position: Vec3::zeros(), axis: Vec3::z() })));
        // perturb and probe 1000 steps
        for (i, p) in sim.state.rod.positions.iter_mut().enumerate() {
            p.y += 1e-6 * ((i % 3) as f64 - 1.0);
        }
        for _ in 0..1000 {
            sim.step().unwrap();
        }
        // drag must bleed the zigzag energy off, never pump it up
        let e0 = sim.world.mechanical_energy(&sim.state).unwrap();
        for _ in 0..1000 {
            sim.step().unwrap();
        }
        let e1 = sim.world.mechanical_energy(&sim.state).unwrap();
        assert!(e1 <= e0, "{e1} > {e0}");
    }

    #[test]
    fn dt_above_limit_is_rejected() {
        let rod = fibre(30);
        let cfg = SimConfig { dt: 1e-2, ..SimConfig::default() };
        match World::new(rod, tank(), None, cfg) {
            Err(Error::TimeStepTooLarge { dt, limit }) => {
                assert_eq!(dt, 1e-2);
                assert!(limit < dt);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_duration_gives_one_frame() {
        let w = world(fibre(12), None);
        let c = Controller::ScriptedPath(ScriptedPath::stationary(MagnetPose { position: Vec3::zeros(), axis: Vec3::z() }));
        let t = run(&w, &c, 0.0).unwrap();
        assert_eq!(t.frames.len(), 1);
    }

    #[test]
    fn frame_count_and_monotone_time() {
        let mut w = world(fibre(12), None);
        w.config.record_stride = 10;
        let c = Controller::ScriptedPath(ScriptedPath::stationary(MagnetPose { position: Vec3::zeros(), axis: Vec3::z() }));
        let t = run(&w, &c, 100.0 * w.config.dt).unwrap();
        assert_eq!(t.frames.len(), 100 / 10 + 1);
        assert!(t.frames.windows(2).all(|f| f[1].t > f[0].t));
    }

    #[test]
    fn stokes_terminal_velocity() {
        // single sphere: the bead node of a tiny two-node probe with negligible rod
        let w = crate::experiments::stokes_probe_world(50e-6, 1e-3, 2000.0).unwrap();
        let (v, expected) = crate::experiments::stokes_terminal_velocity(&w).unwrap();
        assert!((v - expected).abs() <= 0.01 * expected, "{v} vs {expected}");
    }

    #[test]
    fn far_stationary_magnet_leaves_rod_at_rest() {
        let design = paper_design(Variant::BoasBigHead);
        let rod = discretize(&design, 0.5e-3).unwrap();
        let magnet = MagnetSource::guiding(Vec3::new(1.0, 1.0, 1.0), Vec3::z());
        let w = world(rod, Some(magnet));
        let c = Controller::ScriptedPath(ScriptedPath::stationary(MagnetPose::of(w.magnet.as_ref().unwrap())));
        let t = run(&w, &c, 0.02).unwrap();
        let (a, b) = (&t.frames[0], t.last().unwrap());
        let drift = a.positions.iter().zip(&b.positions).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(drift < 1e-6, "{drift}");
    }

    #[test]
    fn external_log_replay_matches_live() {
        let design = paper_design(Variant::BoasBigHead);
        let rod = discretize(&design, 0.5e-3).unwrap();
        let magnet = MagnetSource::guiding(Vec3::new(14e-3, 0.0, -20e-3), Vec3::z());
        let mut w = world(rod, Some(magnet));
        w.config.record_stride = 50;
        let initial = MagnetPose::of(w.magnet.as_ref().unwrap());
        let mut live = Simulation::new(w.clone(), Controller::External(ExternalController::new(initial)));
        let mut traj = Trajectory::default();
        live.record(&mut traj);
        for k in 1..=600u64 {
            if k % 97 == 0 {
                if let Controller::External(e) = &mut live.controller {
                    let pose = MagnetPose::new(Vec3::new(14e-3 + k as f64 * 1e-6, 0.0, -20e-3), Vec3::new(0.1, 0.0, 1.0)).unwrap();
                    e.push(live.state.step, pose).unwrap();
                }
            }
            live.step().unwrap();
            if k % 50 == 0 {
                live.record(&mut traj);
            }
        }
        let Controller::External(e) = &live.controller else { unreachable!() };
        let log = CommandLog { schema: "1".into(), scenario: "test".into(), dt: w.config.dt, steps: 600, commands: e.logged().to_vec() };
        let parsed = CommandLog::parse(&log.to_json()).unwrap();
        let replay = Controller::External(ExternalController::from_log(initial, &parsed).unwrap());
        let mut sim = Simulation::new(w, replay);
        let t2 = sim.run_steps(600).unwrap();
        assert_eq!(traj.hash(), t2.hash());
    }

    #[test]
    fn rotating_field_keeps_unit_axis() {
        let r = RotatingField { position: Vec3::zeros(), initial_axis: Vec3::x(), spin_axis: Vec3::z(), omega: 2.0 };
        let p = r.pose_at(std::f64::consts::FRAC_PI_4);
        assert!((p.axis - Vec3::y()).norm() < 1e-12);
        assert_relative_eq!(r.pose_at(1.234).axis.norm(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn scripted_path_interpolates() {
        let p = ScriptedPath::new(vec![
            Waypoint { t: 0.0, pose: MagnetPose { position: Vec3::zeros(), axis: Vec3::x() } },
            Waypoint { t: 1.0, pose: MagnetPose { position: Vec3::new(1.0, 0.0, 0.0), axis: Vec3::y() } },
        ])
        .unwrap();
        let m = p.pose_at(0.5);
        assert_relative_eq!(m.position.x, 0.5);
        assert_relative_eq!(m.axis.norm(), 1.0, max_relative = 1e-15);
        assert_eq!(p.pose_at(-1.0).position, Vec3::zeros());
        assert_eq!(p.pose_at(9.0).position.x, 1.0);
        assert!(ScriptedPath::new(vec![]).is_err());
    }

    #[test]
    fn segment_closest_points() {
        let (s, t) = closest_segment_params(&Vec3::zeros(), &Vec3::x(), &Vec3::new(0.5, 1.0, -1.0), &Vec3::new(0.5, 1.0, 1.0));
        assert_relative_eq!(s, 0.5);
        assert_relative_eq!(t, 0.5);
        let (s, t) = closest_segment_params(&Vec3::zeros(), &Vec3::x(), &Vec3::new(2.0, 0.0, 0.0), &Vec3::new(3.0, 0.0, 0.0));
        assert_eq!((s, t), (1.0, 0.0));
    }

    #[test]
    fn cargo_is_pushed_not_pulled() {
        let rod = fibre(12);
        let mut scene = tank();
        scene.cargo.push(CargoBody { radius: 1e-3, mass: 1e-6, position: Vec3::new(16e-3, 0.0, 0.0), velocity: Vec3::zeros() });
        let w = World::with_stable_dt(rod, scene, None, SimConfig::default()).unwrap();
        let s = w.initial_state();
        let f = w.assemble_forces(&s).unwrap();
        // tip node penetrates the cargo by 0.05 mm and pushes it along +x
        assert!(f.cargo[0].x > 0.0);
        assert_relative_eq!(f.cargo[0].x, -f.nodes[w.rod.head_node()].x, max_relative = 1e-12);
    }

    #[test]
    fn galilean_drift() {
        let design = paper_design(Variant::Boas);
        let rod = discretize(&design, 0.5e-3).unwrap();
        let u = Vec3::new(2e-3, -1e-3, 0.5e-3);
        let base = World::with_stable_dt(rod.clone(), tank(), None, SimConfig::default()).unwrap();
        let mut scene = tank();
        scene.ambient_flow = crate::environment::AmbientFlow::Uniform(u);
        let moving = World::with_stable_dt(rod, scene, None, SimConfig::default()).unwrap();
        let mut s0 = base.initial_state();
        for (i, p) in s0.rod.positions.iter_mut().enumerate() {
            p.y += 20e-6 * (i as f64 * 0.3).sin();
        }
        let mut s1 = s0.clone();
        s1.rod.velocities.iter_mut().for_each(|v| *v += u);
        let c = Controller::ScriptedPath(ScriptedPath::stationary(MagnetPose { position: Vec3::zeros(), axis: Vec3::z() }));
        let mut a = Simulation::from_state(base, s0, c.clone());
        let mut b = Simulation::from_state(moving, s1, c);
        let steps = 20_000;
        for _ in 0..steps {
            a.step().unwrap();
            b.step().unwrap();
        }
        let t = a.state.time();
        let drift = a
            .state
            .rod
            .positions
            .iter()
            .zip(&b.state.rod.positions)
            .map(|(p, q)| (q - p - u * t).norm())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-9 * t.max(1e-3), "{drift} over {t}");
    }

    #[test]
    fn static_solver_matches_small_cantilever() {
        let n = 40;
        let (len, d, e) = (15e-3, 100e-6, 22e6);
        let (rod, fixed) = crate::experiments::clamped_fibre(len, d, e, n).unwrap();
        let cfg = SimConfig { fixed_nodes: fixed, ..SimConfig::default() };
        let w = World::with_stable_dt(rod, tank(), None, cfg).unwrap();
        let ei = w.rod.segments[0].ei;
        let force = 0.01 * len * 3.0 * ei / len.powi(3);
        let mut loads = vec![Vec3::zeros(); w.rod.n_nodes()];
        loads[w.rod.head_node()] = Vec3::new(0.0, 0.0, force);
        let sol = w.solve_static(&w.rod.rest_positions(), &StaticOptions { loads, include_magnet: false, ..Default::default() }).unwrap();
        assert!(sol.converged);
        let delta = sol.positions[w.rod.head_node()].z;
        let exact = rod::cantilever_deflection(force, len, ei);
        assert!((delta - exact).abs() <= 0.02 * exact, "{delta} vs {exact}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn internal_forces_sum_to_zero(seed in proptest::collection::vec(-1.0f64..1.0, 3 * 21)) {
            let rod = fibre(20);
            let w = world(rod, None);
            let mut s = w.initial_state();
            for (i, p) in s.rod.positions.iter_mut().enumerate() {
                *p += Vec3::new(seed[3 * i], seed[3 * i + 1], seed[3 * i + 2]) * 100e-6;
            }
            let mut out = vec![Vec3::zeros(); w.rod.n_nodes()];
            rod::add_stretching_forces(&w.rod, &s.rod.positions, &mut out).unwrap();
            rod::add_bending_forces(&w.rod, &s.rod.positions, &mut out).unwrap();
            let scale = out.iter().map(|f| f.norm()).fold(0.0, f64::max);
            let sum: Vec3 = out.iter().sum();
            prop_assert!(sum.norm() <= 1e-12 * scale.max(1e-30));
        }
    }
}
