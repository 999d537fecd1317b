//! Signed-distance scenes, wall contact, cargo bodies and ambient flow.
//!
//! Distances are positive inside the lumen (the fluid region the robot may
//! occupy) and negative inside walls. Built-in scenes reconstruct the
//! demonstration phantoms; dimensions the phantoms leave open are marked as
//! reconstructions on the builder functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hydro::Fluid;
use crate::units::Vec3;

/// One piece of a channel centreline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathPiece {
    Line { from: Vec3, to: Vec3 },
    /// Circular arc `center + radius (cos phi u + sin phi v)` for phi from
    /// `start` to `start + sweep` (sweep may be negative).
    Arc { center: Vec3, radius: f64, u: Vec3, v: Vec3, start: f64, sweep: f64 },
}

impl PathPiece {
    pub fn length(&self) -> f64 {
        match *self {
            PathPiece::Line { from, to } => (to - from).norm(),
            PathPiece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn point_at(&self, s: f64) -> Vec3 {
        match *self {
            PathPiece::Line { from, to } => {
                let len = (to - from).norm();
                from + (to - from) * (s / len).clamp(0.0, 1.0)
            }
            PathPiece::Arc { center, radius, u, v, start, sweep } => {
                let phi = start + sweep.signum() * (s / radius).clamp(0.0, sweep.abs());
                center + (u * phi.cos() + v * phi.sin()) * radius
            }
        }
    }

    /// Distance from `p` and the arc length of the closest point.
    pub fn closest(&self, p: &Vec3) -> (f64, f64) {
        let (d, s, _) = self.nearest(p, f64::INFINITY).expect("unbounded search always finds a point");
        (d, s)
    }

    /// Distance, arc length and closest point, or `None` when the piece is
    /// certainly farther than `bound`.
    fn nearest(&self, p: &Vec3, bound: f64) -> Option<(f64, f64, Vec3)> {
        match *self {
            PathPiece::Line { from, to } => {
                let d = to - from;
                let len2 = d.norm_squared();
                let t = if len2 > 0.0 { ((p - from).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let q = from + d * t;
                Some(((q - p).norm(), t * len2.sqrt(), q))
            }
            PathPiece::Arc { center, radius, u, v, start, sweep } => {
                let d = p - center;
                let (a, b) = (d.dot(&u), d.dot(&v));
                let n = u.cross(&v);
                let h = d.dot(&n);
                let rho = (a * a + b * b).sqrt();
                // distance to the full circle bounds the distance to the arc
                let to_circle = ((rho - radius).powi(2) + h * h).sqrt();
                if to_circle >= bound {
                    return None;
                }
                // angular offset from the start, measured in the sweep direction
                let phi = b.atan2(a);
                let off = ((phi - start) * sweep.signum()).rem_euclid(2.0 * PI);
                if rho > 0.0 && off <= sweep.abs() {
                    let q = center + (u * phi.cos() + v * phi.sin()) * radius;
                    Some((to_circle, off * radius, q))
                } else {
                    let (q0, q1) = (self.point_at(0.0), self.point_at(self.length()));
                    let (d0, d1) = ((q0 - p).norm(), (q1 - p).norm());
                    if d0 <= d1 {
                        Some((d0, 0.0, q0))
                    } else {
                        Some((d1, self.length(), q1))
                    }
                }
            }
        }
    }
}

/// A centreline made of lines and arcs, with arc-length checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub pieces: Vec<PathPiece>,
    /// Arc lengths of notable points along the route (e.g. turn apexes).
    pub checkpoints: Vec<f64>,
}

impl Route {
    pub fn length(&self) -> f64 {
        self.pieces.iter().map(PathPiece::length).sum()
    }

    /// Distance to the centreline and arc length of the closest point.
    pub fn closest(&self, p: &Vec3) -> (f64, f64) {
        let (d, s, _) = self.nearest(p);
        (d, s)
    }

    /// Distance, arc length and position of the closest centreline point.
    pub fn nearest(&self, p: &Vec3) -> (f64, f64, Vec3) {
        let mut best = (f64::INFINITY, 0.0, *p);
        let mut offset = 0.0;
        for piece in &self.pieces {
            if let Some((d, s, q)) = piece.nearest(p, best.0) {
                if d < best.0 {
                    best = (d, offset + s, q);
                }
            }
            offset += piece.length();
        }
        best
    }

    pub fn point_at(&self, s: f64) -> Vec3 {
        let mut rest = s.max(0.0);
        for piece in &self.pieces {
            let len = piece.length();
            if rest <= len {
                return piece.point_at(rest);
            }
            rest -= len;
        }
        let last = self.pieces.last().expect("non-empty route");
        last.point_at(last.length())
    }
}

/// Composable distance field, positive inside the region it describes.
#[derive(Debug, Clone, PartialEq)]
pub enum Sdf {
    /// Circle of `radius` swept along a centreline (capped at the ends).
    Tube { route: Route, radius: f64 },
    /// Capped cylinder between two points.
    Cylinder { start: Vec3, end: Vec3, radius: f64 },
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
    Union(Vec<Sdf>),
    Intersection(Vec<Sdf>),
    Complement(std::boxed::Box<Sdf>),
}

impl Sdf {
    pub fn eval(&self, p: &Vec3) -> f64 {
        match self {
            Sdf::Tube { route, radius } => radius - route.closest(p).0,
            Sdf::Cylinder { start, end, radius } => {
                let axis = end - start;
                let len = axis.norm();
                let a = axis / len;
                let d = p - start;
                let t = d.dot(&a);
                let radial = (d - a * t).norm();
                let half = 0.5 * len;
                let axial = half - (t - half).abs();
                let r = radius - radial;
                if r < 0.0 && axial < 0.0 {
                    -(r * r + axial * axial).sqrt()
                } else {
                    r.min(axial)
                }
            }
            Sdf::Sphere { center, radius } => radius - (p - center).norm(),
            Sdf::Box { center, half_extents } => {
                let q = (p - center).abs() - half_extents;
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                if outside > 0.0 {
                    -outside
                } else {
                    -q.max()
                }
            }
            Sdf::Union(parts) => parts.iter().map(|s| s.eval(p)).fold(f64::NEG_INFINITY, f64::max),
            Sdf::Intersection(parts) => parts.iter().map(|s| s.eval(p)).fold(f64::INFINITY, f64::min),
            Sdf::Complement(inner) => -inner.eval(p),
        }
    }

    /// Value and gradient. The gradient is exact wherever the field is
    /// smooth and picks the active branch at creases.
    pub fn eval_grad(&self, p: &Vec3) -> (f64, Vec3) {
        match self {
            Sdf::Tube { route, radius } => {
                let (d, _, q) = route.nearest(p);
                let g = if d > 0.0 { (q - p) / d } else { Vec3::z() };
                (radius - d, g)
            }
            Sdf::Cylinder { start, end, radius } => {
                let axis = end - start;
                let len = axis.norm();
                let a = axis / len;
                let d = p - start;
                let t = d.dot(&a);
                let radial_vec = d - a * t;
                let radial = radial_vec.norm();
                let grad_r = if radial > 0.0 { -radial_vec / radial } else { Vec3::zeros() };
                let half = 0.5 * len;
                let axial = half - (t - half).abs();
                let grad_axial = -a * (t - half).signum();
                let r = radius - radial;
                if r < 0.0 && axial < 0.0 {
                    let v = (r * r + axial * axial).sqrt();
                    (-v, -(grad_r * r + grad_axial * axial) / v)
                } else if r <= axial {
                    (r, grad_r)
                } else {
                    (axial, grad_axial)
                }
            }
            Sdf::Sphere { center, radius } => {
                let d = p - center;
                let n = d.norm();
                (radius - n, if n > 0.0 { -d / n } else { Vec3::z() })
            }
            Sdf::Box { center, half_extents } => {
                let rel = p - center;
                let sign = rel.map(|c| if c < 0.0 { -1.0 } else { 1.0 });
                let q = rel.abs() - half_extents;
                let pos = q.map(|c| c.max(0.0));
                let outside = pos.norm();
                if outside > 0.0 {
                    (-outside, -pos.component_mul(&sign) / outside)
                } else {
                    let k = q.imax();
                    let mut g = Vec3::zeros();
                    g[k] = -sign[k];
                    (-q[k], g)
                }
            }
            Sdf::Union(parts) => parts
                .iter()
                .map(|s| s.eval_grad(p))
                .fold((f64::NEG_INFINITY, Vec3::z()), |best, x| if x.0 > best.0 { x } else { best }),
            Sdf::Intersection(parts) => parts
                .iter()
                .map(|s| s.eval_grad(p))
                .fold((f64::INFINITY, Vec3::z()), |best, x| if x.0 < best.0 { x } else { best }),
            Sdf::Complement(inner) => {
                let (v, g) = inner.eval_grad(p);
                (-v, -g)
            }
        }
    }
}

/// Central-difference step for SDF normals, m.
pub const NORMAL_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample {
    pub distance: f64,
    /// Unit normal pointing into the lumen.
    pub normal: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmbientFlow {
    None,
    Uniform(Vec3),
    /// `u_max (1 - (r/R)^2)` along `direction` inside a straight channel.
    Poiseuille { origin: Vec3, direction: Vec3, radius: f64, max_speed: f64 },
}

impl AmbientFlow {
    pub fn at(&self, p: &Vec3) -> Vec3 {
        match *self {
            AmbientFlow::None => Vec3::zeros(),
            AmbientFlow::Uniform(u) => u,
            AmbientFlow::Poiseuille { origin, direction, radius, max_speed } => {
                let d = p - origin;
                let r = (d - direction * d.dot(&direction)).norm();
                if r >= radius {
                    Vec3::zeros()
                } else {
                    direction * (max_speed * (1.0 - (r / radius).powi(2)))
                }
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, AmbientFlow::None)
    }
}

/// A rigid sphere the robot can push or wrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CargoBody {
    pub radius: f64,
    pub mass: f64,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl CargoBody {
    /// The 38 mg, 6.7 mm polymer particle of the transport demonstration.
    pub fn paper_default(position: Vec3) -> Self {
        Self { radius: 3.35e-3, mass: 38e-6, position, velocity: Vec3::zeros() }
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.mass > 0.0) {
            return Err(Error::Domain("cargo radius and mass must be positive".into()));
        }
        Ok(())
    }
}

/// Fraction-of-body target used by the embolisation metric: the part of a
/// sphere beyond the plane through `neck_point` with normal `neck_normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetRegion {
    pub center: Vec3,
    pub radius: f64,
    pub neck_point: Vec3,
    pub neck_normal: Vec3,
}

impl TargetRegion {
    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.center).norm() <= self.radius && (p - self.neck_point).dot(&self.neck_normal) >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub sdf: Sdf,
    pub fluid: Fluid,
    pub ambient_flow: AmbientFlow,
    pub cargo: Vec<CargoBody>,
    pub friction_coeff: f64,
    /// N/m per metre of penetration.
    pub contact_stiffness: f64,
    pub self_contact: bool,
    pub route: Option<Route>,
    pub target: Option<TargetRegion>,
    /// Default tail position and heading of a robot placed in the scene.
    pub start: Vec3,
    pub start_direction: Vec3,
}

pub const DEFAULT_CONTACT_STIFFNESS: f64 = 10.0;
pub const DEFAULT_FRICTION: f64 = 0.3;
/// Regularisation time of the Coulomb friction law, s.
pub const STICK_TIME: f64 = 1e-3;

impl Scene {
    pub fn new(name: &str, sdf: Sdf) -> Self {
        Self {
            name: name.to_owned(),
            sdf,
            fluid: Fluid::WATER,
            ambient_flow: AmbientFlow::None,
            cargo: Vec::new(),
            friction_coeff: DEFAULT_FRICTION,
            contact_stiffness: DEFAULT_CONTACT_STIFFNESS,
            self_contact: false,
            route: None,
            target: None,
            start: Vec3::zeros(),
            start_direction: Vec3::x(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fluid.validate()?;
        if !(self.friction_coeff >= 0.0) || !(self.contact_stiffness > 0.0) {
            return Err(Error::Domain("friction must be >= 0 and contact stiffness > 0".into()));
        }
        for c in &self.cargo {
            c.validate()?;
        }
        Ok(())
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.sdf.eval(p)
    }

    /// Signed distance and lumen-pointing unit normal.
    pub fn sdf_eval(&self, p: &Vec3) -> SdfSample {
        let (distance, g) = self.sdf.eval_grad(p);
        let n = g.norm();
        SdfSample { distance, normal: if n > 0.0 { g / n } else { Vec3::z() } }
    }

    pub fn normal(&self, p: &Vec3) -> Vec3 {
        self.sdf_eval(p).normal
    }

    /// Central-difference normal, kept as a check on the analytic one.
    pub fn normal_fd(&self, p: &Vec3) -> Vec3 {
        let h = NORMAL_STEP;
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            g[k] = (self.sdf.eval(&(p + e)) - self.sdf.eval(&(p - e))) / (2.0 * h);
        }
        let n = g.norm();
        if n > 0.0 {
            g / n
        } else {
            Vec3::z()
        }
    }

    /// Wall outline in the plane `z`, as line segments `[x0, y0, x1, y1]`
    /// from marching squares on an `n`×`n` grid over `[lo, hi]` (x-y only).
    pub fn slice_outline(&self, z: f64, lo: [f64; 2], hi: [f64; 2], n: usize) -> Vec<[f64; 4]> {
        let n = n.max(2);
        let step = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        let at = |i: usize, j: usize| [lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1]];
        let mut value = vec![0.0; (n + 1) * (n + 1)];
        for j in 0..=n {
            for i in 0..=n {
                let [x, y] = at(i, j);
                value[j * (n + 1) + i] = self.distance(&Vec3::new(x, y, z));
            }
        }
        let v = |i: usize, j: usize| value[j * (n + 1) + i];
        let mut segments = Vec::new();
        for j in 0..n {
            for i in 0..n {
                // corners counter-clockwise from the lower left
                let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let mut crossings = Vec::with_capacity(4);
                for k in 0..4 {
                    let (a, b) = (c[k], c[(k + 1) % 4]);
                    let (va, vb) = (v(a.0, a.1), v(b.0, b.1));
                    if (va > 0.0) != (vb > 0.0) {
                        let t = va / (va - vb);
                        let (pa, pb) = (at(a.0, a.1), at(b.0, b.1));
                        crossings.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                    }
                }
                // two or four crossings; pair them in edge order
                for pair in crossings.chunks_exact(2) {
                    segments.push([pair[0][0], pair[0][1], pair[1][0], pair[1][1]]);
                }
            }
        }
        segments
    }

    pub fn ambient_flow(&self, p: &Vec3) -> Vec3 {
        self.ambient_flow.at(p)
    }

    pub fn contact_params(&self) -> ContactParams {
        ContactParams { stiffness: self.contact_stiffness, friction: self.friction_coeff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub stiffness: f64,
    pub friction: f64,
}

/// Penalty normal force with regularised Coulomb friction.
///
/// `distance` is the body centre's signed distance to the wall, `velocity`
/// the body velocity relative to the wall.
pub fn contact_force(distance: f64, normal: &Vec3, velocity: &Vec3, body_radius: f64, params: &ContactParams) -> Vec3 {
    let penetration = body_radius - distance;
    if !(penetration > 0.0) {
        return Vec3::zeros();
    }
    let fn_vec = normal * (params.stiffness * penetration);
    let vt = velocity - normal * normal.dot(velocity);
    let speed = vt.norm();
    if speed == 0.0 {
        return fn_vec;
    }
    let stick = params.stiffness * STICK_TIME;
    let ft = (params.friction * fn_vec.norm()).min(stick * speed);
    fn_vec - vt * (ft / speed)
}

/// Names accepted by [`build_scene`].
pub const BUILTIN_SCENES: [&str; 5] = ["serpentine", "three-holes", "bifurcation", "aneurysm", "tank"];

pub fn build_scene(name: &str) -> Result<Scene> {
    match name {
        "serpentine" => Ok(serpentine()),
        "three-holes" => Ok(three_holes()),
        "bifurcation" => Ok(bifurcation()),
        "aneurysm" => Ok(aneurysm()),
        "tank" => Ok(tank()),
        _ => Err(Error::UnknownName {
            kind: "scene",
            name: name.to_owned(),
            suggestions: crate::scenario::suggest(name, &BUILTIN_SCENES.map(String::from)),
        }),
    }
}

/// Turn radii of the serpentine channel, in order of traversal, m.
pub const SERPENTINE_RADII: [f64; 5] = [0.84e-3, 1.02e-3, 1.19e-3, 2.20e-3, 2.50e-3];
/// Lumen width (reconstruction), m.
pub const SERPENTINE_WIDTH: f64 = 1.0e-3;
/// Heading of the straight legs relative to the channel axis (reconstruction).
pub const SERPENTINE_LEG_ANGLE: f64 = PI / 3.0;
pub const SERPENTINE_LEG: f64 = 2.0e-3;
pub const SERPENTINE_LEAD: f64 = 18.0e-3;

/// Zig-zag channel of five alternating turns, one per radius, joined by short
/// legs at `±SERPENTINE_LEG_ANGLE`, with straight lead-in/out long enough to
/// hold a 15 mm robot. Lies in the `z = 0` plane.
pub fn serpentine_route() -> Route {
    let mut pieces = Vec::new();
    let mut checkpoints = Vec::new();
    let mut pos = Vec3::zeros();
    let mut heading = -SERPENTINE_LEG_ANGLE;
    let dir = |h: f64| Vec3::new(h.cos(), h.sin(), 0.0);
    let mut travelled = 0.0;

    let push_line = |pieces: &mut Vec<PathPiece>, pos: &mut Vec3, heading: f64, len: f64, travelled: &mut f64| {
        let to = *pos + dir(heading) * len;
        pieces.push(PathPiece::Line { from: *pos, to });
        *pos = to;
        *travelled += len;
    };

    push_line(&mut pieces, &mut pos, heading, SERPENTINE_LEAD, &mut travelled);
    for (k, &r) in SERPENTINE_RADII.iter().enumerate() {
        // Turn left on even turns, right on odd ones.
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let sweep = sign * 2.0 * SERPENTINE_LEG_ANGLE;
        let left = Vec3::new(-heading.sin(), heading.cos(), 0.0);
        let center = pos + left * (sign * r);
        let start_vec = pos - center;
        let start = start_vec.y.atan2(start_vec.x);
        let arc = PathPiece::Arc { center, radius: r, u: Vec3::x(), v: Vec3::y(), start, sweep };
        checkpoints.push(travelled + 0.5 * arc.length());
        travelled += arc.length();
        pos = arc.point_at(arc.length());
        pieces.push(arc);
        heading += sweep;
        let len = if k + 1 == SERPENTINE_RADII.len() { SERPENTINE_LEAD } else { SERPENTINE_LEG };
        push_line(&mut pieces, &mut pos, heading, len, &mut travelled);
    }
    Route { pieces, checkpoints }
}

pub fn serpentine() -> Scene {
    let route = serpentine_route();
    let mut scene = Scene::new("serpentine", Sdf::Tube { route: route.clone(), radius: 0.5 * SERPENTINE_WIDTH });
    scene.fluid = Fluid::BLOOD_MIMIC;
    scene.start = route.point_at(0.5e-3);
    scene.start_direction = Vec3::new(SERPENTINE_LEG_ANGLE.cos(), -SERPENTINE_LEG_ANGLE.sin(), 0.0);
    scene.route = Some(route);
    scene
}

pub const HOLE_DIAMETER: f64 = 1.5e-3;
/// Hole pitch and plate thickness (reconstructions), m.
pub const HOLE_PITCH: f64 = 10e-3;
pub const PLATE_THICKNESS: f64 = 2e-3;

/// Horizontal plate with three equidistant holes inside a water tank.
pub fn three_holes() -> Scene {
    let tank = Sdf::Box { center: Vec3::zeros(), half_extents: Vec3::new(40e-3, 25e-3, 25e-3) };
    let plate = Sdf::Box { center: Vec3::zeros(), half_extents: Vec3::new(25e-3, 10e-3, 0.5 * PLATE_THICKNESS) };
    let holes = Sdf::Union(
        [-HOLE_PITCH, 0.0, HOLE_PITCH]
            .iter()
            .map(|&x| Sdf::Cylinder {
                start: Vec3::new(x, 0.0, -5e-3),
                end: Vec3::new(x, 0.0, 5e-3),
                radius: 0.5 * HOLE_DIAMETER,
            })
            .collect(),
    );
    let solid = Sdf::Intersection(vec![plate, Sdf::Complement(std::boxed::Box::new(holes))]);
    let mut scene = Scene::new("three-holes", Sdf::Intersection(vec![tank, Sdf::Complement(std::boxed::Box::new(solid))]));
    let route = Route {
        pieces: vec![PathPiece::Line { from: Vec3::new(-HOLE_PITCH, 0.0, 0.0), to: Vec3::new(HOLE_PITCH, 0.0, 0.0) }],
        checkpoints: vec![0.0, HOLE_PITCH, 2.0 * HOLE_PITCH],
    };
    scene.route = Some(route);
    scene.start = Vec3::new(-35e-3, 0.0, 6e-3);
    scene
}

pub const PARENT_WIDTH: f64 = 25e-3;
pub const BRANCH_WIDTH: f64 = 2e-3;

/// Bifurcated channel: a 25 mm parent vessel that splits into a 2 mm branch
/// and a 10 mm daughter vessel (daughter width and lengths are
/// reconstructions). The cargo sits in the parent near the junction.
pub fn bifurcation() -> Scene {
    let parent = Route {
        pieces: vec![PathPiece::Line { from: Vec3::new(-30e-3, 0.0, 0.0), to: Vec3::new(0.0, 0.0, 0.0) }],
        checkpoints: vec![],
    };
    let branch = Route {
        pieces: vec![PathPiece::Line { from: Vec3::new(5e-3, 8e-3, 0.0), to: Vec3::new(40e-3, 8e-3, 0.0) }],
        checkpoints: vec![],
    };
    let daughter = Route {
        pieces: vec![PathPiece::Line { from: Vec3::new(5e-3, -6e-3, 0.0), to: Vec3::new(40e-3, -16e-3, 0.0) }],
        checkpoints: vec![],
    };
    let sdf = Sdf::Union(vec![
        Sdf::Tube { route: parent.clone(), radius: 0.5 * PARENT_WIDTH },
        Sdf::Tube { route: branch.clone(), radius: 0.5 * BRANCH_WIDTH },
        Sdf::Tube { route: daughter, radius: 5e-3 },
    ]);
    let mut scene = Scene::new("bifurcation", sdf);
    scene.fluid = Fluid::BLOOD_MIMIC;
    scene.cargo.push(CargoBody::paper_default(Vec3::new(-8e-3, 2e-3, 0.0)));
    scene.route = Some(branch);
    scene.start = Vec3::new(-28e-3, -4e-3, 0.0);
    scene
}

pub const ARTERY_DIAMETER: f64 = 4e-3;
pub const NECK_DIAMETER: f64 = 4e-3;
pub const DOME_HEIGHT: f64 = 7e-3;

/// Sphere through the neck circle whose apex sits `DOME_HEIGHT` above the
/// neck plane: returns (radius, centre height above the neck plane).
pub fn dome_sphere() -> (f64, f64) {
    let a = 0.5 * NECK_DIAMETER;
    let r = (DOME_HEIGHT * DOME_HEIGHT + a * a) / (2.0 * DOME_HEIGHT);
    (r, DOME_HEIGHT - r)
}

/// Straight 4 mm parent artery along x with a spherical dome on its +y
/// side: 4 mm neck, 7 mm dome height.
pub fn aneurysm() -> Scene {
    let half = 0.5 * ARTERY_DIAMETER;
    let artery = Sdf::Cylinder { start: Vec3::new(-35e-3, 0.0, 0.0), end: Vec3::new(15e-3, 0.0, 0.0), radius: half };
    let (r, c) = dome_sphere();
    let center = Vec3::new(0.0, half + c, 0.0);
    let dome = Sdf::Sphere { center, radius: r };
    let mut scene = Scene::new("aneurysm", Sdf::Union(vec![artery, dome]));
    scene.fluid = Fluid::BLOOD_MIMIC;
    scene.self_contact = true;
    scene.target = Some(TargetRegion { center, radius: r, neck_point: Vec3::new(0.0, half, 0.0), neck_normal: Vec3::y() });
    scene.start = Vec3::new(-33e-3, 0.0, 0.0);
    scene
}

/// Open water tank whose walls are far beyond any robot's reach.
pub fn tank() -> Scene {
    Scene::new("tank", Sdf::Box { center: Vec3::zeros(), half_extents: Vec3::new(2.0, 2.0, 0.5) })
}
