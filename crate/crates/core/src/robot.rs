//! Discretisation of a [`RobotDesign`] into nodes, segments and bead dipoles.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fabrication::{RobotDesign, Variant};
use crate::units::{rotation_between, Vec3, MU0};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionProperties {
    /// Axial stiffness, N.
    pub ea: f64,
    /// Bending stiffness, N·m².
    pub ei: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodNode {
    pub rest_position: Vec3,
    pub mass: f64,
    /// Stokes-sphere radius for bead and head nodes; zero on bare nodes.
    pub drag_radius: f64,
    /// Radius used for wall and self contact.
    pub contact_radius: f64,
    /// Displaced volume, m³ (buoyancy).
    pub volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodSegment {
    pub rest_length: f64,
    pub ea: f64,
    pub ei: f64,
    pub drag_diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bead {
    pub node: usize,
    pub volume: f64,
    /// A·m².
    pub dipole_magnitude: f64,
    /// Magnetisation direction in the rest (body) frame, unit norm.
    pub magnetization_dir_body: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagnetizationPolicy {
    /// Along the rest tangent.
    #[default]
    AlongBody,
    /// Rest-frame +z for every bead (transverse to the body).
    TransverseUniform,
    Custom(Vec3),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRod {
    pub nodes: Vec<RodNode>,
    pub segments: Vec<RodSegment>,
    pub beads: Vec<Bead>,
    /// Total body length used for the slender-body drag coefficients, m.
    pub length: f64,
}

pub const MIN_SEGMENTS: usize = 10;

impl DiscreteRod {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.mass).sum()
    }

    pub fn rest_positions(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|n| n.rest_position).collect()
    }

    pub fn head_node(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Rigidly moves the rest configuration so the tail sits at `origin` and
    /// the body points along `direction`; magnetisation directions rotate with it.
    pub fn placed(&self, origin: Vec3, direction: Vec3) -> Result<DiscreteRod> {
        let norm = direction.norm();
        if !(norm > 0.0) {
            return Err(domain("placement direction must be non-zero"));
        }
        let tail = self.nodes[0].rest_position;
        let axis = (self.nodes[self.nodes.len() - 1].rest_position - tail).normalize();
        let rot = rotation_between(&axis, &(direction / norm));
        let mut rod = self.clone();
        for node in &mut rod.nodes {
            node.rest_position = origin + rot * (node.rest_position - tail);
        }
        for bead in &mut rod.beads {
            bead.magnetization_dir_body = (rot * bead.magnetization_dir_body).normalize();
        }
        Ok(rod)
    }

    /// Plain homogeneous fibre along +x from the origin, no beads.
    pub fn uniform(length: f64, diameter: f64, modulus: f64, density: f64, n_segments: usize) -> Result<DiscreteRod> {
        if !(length > 0.0 && diameter > 0.0 && modulus > 0.0 && density > 0.0) {
            return Err(domain("uniform rod parameters must be positive"));
        }
        if n_segments < 1 {
            return Err(Error::Resolution("a rod needs at least one segment".into()));
        }
        let area = std::f64::consts::PI * diameter * diameter / 4.0;
        let inertia = std::f64::consts::PI * diameter.powi(4) / 64.0;
        let l0 = length / n_segments as f64;
        let nodes = (0..=n_segments)
            .map(|i| {
                let share = if i == 0 || i == n_segments { 0.5 } else { 1.0 };
                RodNode {
                    rest_position: Vec3::new(i as f64 * l0, 0.0, 0.0),
                    mass: share * density * area * l0,
                    drag_radius: 0.0,
                    contact_radius: 0.5 * diameter,
                    volume: share * area * l0,
                }
            })
            .collect();
        let segments =
            vec![RodSegment { rest_length: l0, ea: modulus * area, ei: modulus * inertia, drag_diameter: diameter }; n_segments];
        Ok(DiscreteRod { nodes, segments, beads: Vec::new(), length })
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() != self.segments.len() + 1 {
            return Err(Error::Invalid("node count must equal segment count + 1".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.rest_length > 0.0 && s.ea > 0.0 && s.ei > 0.0) {
                return Err(Error::Invalid(format!("segment {i} has non-positive length or stiffness")));
            }
        }
        for b in &self.beads {
            if b.node >= self.nodes.len() {
                return Err(Error::Invalid(format!("bead node {} out of range", b.node)));
            }
        }
        Ok(())
    }
}

/// Piecewise-constant outer diameter of the composite along the body.
#[derive(Debug, Clone)]
struct SectionProfile {
    fiber_diameter: f64,
    base_outer: f64,
    /// (start, end, outer diameter) footprints of beads and the head.
    footprints: Vec<(f64, f64, f64)>,
    e_fiber: f64,
    e_composite: f64,
}

impl SectionProfile {
    fn new(design: &RobotDesign) -> Self {
        let d = design.fiber_diameter;
        let base_outer = design.layer_thickness.map_or(d, |t| d + 2.0 * t);
        let mut footprints = Vec::new();
        if let Some(b) = &design.bead_geometry {
            let half = 0.5 * b.major_diameter();
            for s in design.bead_positions() {
                footprints.push(((s - half).max(0.0), (s + half).min(design.length), b.minor_diameter()));
            }
        }
        if let Some(h) = design.head_diameter {
            footprints.push(((design.length - h).max(0.0), design.length, h));
        }
        Self {
            fiber_diameter: d,
            base_outer,
            footprints,
            e_fiber: design.materials.e_fiber,
            e_composite: design.materials.e_composite,
        }
    }

    fn outer_at(&self, s: f64) -> f64 {
        self.footprints
            .iter()
            .filter(|(a, b, _)| s >= *a && s <= *b)
            .fold(self.base_outer, |acc, (_, _, d)| acc.max(*d))
    }

    fn section(&self, outer: f64) -> SectionProperties {
        let df = self.fiber_diameter;
        let outer = outer.max(df);
        SectionProperties {
            ea: self.e_fiber * PI * df * df / 4.0 + self.e_composite * PI * (outer * outer - df * df) / 4.0,
            ei: self.e_fiber * PI * df.powi(4) / 64.0 + self.e_composite * PI * (outer.powi(4) - df.powi(4)) / 64.0,
        }
    }

    /// Series (harmonic) average of EA and EI over `[a, b]`, exact for the
    /// piecewise-constant profile.
    fn averaged(&self, a: f64, b: f64) -> SectionProperties {
        let mut cuts = vec![a, b];
        for (s0, s1, _) in &self.footprints {
            for s in [*s0, *s1] {
                if s > a && s < b {
                    cuts.push(s);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        let (mut inv_ea, mut inv_ei) = (0.0, 0.0);
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let sec = self.section(self.outer_at(0.5 * (w[0] + w[1])));
            inv_ea += len / sec.ea;
            inv_ei += len / sec.ei;
        }
        let len = b - a;
        SectionProperties { ea: len / inv_ea, ei: len / inv_ei }
    }
}

/// Composite section stiffness at arc position `s` (from the tail).
pub fn composite_section_stiffness(design: &RobotDesign, s: f64) -> Result<SectionProperties> {
    if !(0.0..=design.length).contains(&s) {
        return Err(domain(format!("arc position {s:e} m outside [0, {:e}] m", design.length)));
    }
    let profile = SectionProfile::new(design);
    Ok(profile.section(profile.outer_at(s)))
}

/// Builds the rod with the default (along-body) magnetisation.
pub fn discretize(design: &RobotDesign, target_segment_length: f64) -> Result<DiscreteRod> {
    discretize_with(design, target_segment_length, MagnetizationPolicy::AlongBody)
}

pub fn discretize_with(
    design: &RobotDesign,
    target_segment_length: f64,
    policy: MagnetizationPolicy,
) -> Result<DiscreteRod> {
    design.validate()?;
    if !(target_segment_length > 0.0) {
        return Err(domain("target segment length must be positive"));
    }
    let length = design.length;
    let n_seg = (length / target_segment_length * (1.0 + 1e-12)).floor() as usize;
    if n_seg < MIN_SEGMENTS {
        return Err(Error::Resolution(format!(
            "segment length {target_segment_length:e} m gives {n_seg} segments on a {length:e} m body; \
             at least {MIN_SEGMENTS} are required"
        )));
    }

    // Uniform spacing; the last segment absorbs the remainder.
    let mut arc = Vec::with_capacity(n_seg + 1);
    for i in 0..n_seg {
        arc.push(i as f64 * target_segment_length);
    }
    arc.push(length);

    let profile = SectionProfile::new(design);
    let mat = &design.materials;
    let line_mass = design.fiber_area() * mat.density_fiber + design.layer_area() * mat.density_composite;
    let line_volume = design.fiber_area() + design.layer_area();

    let mut nodes: Vec<RodNode> = arc
        .iter()
        .map(|&s| RodNode {
            rest_position: Vec3::new(s, 0.0, 0.0),
            mass: 0.0,
            drag_radius: 0.0,
            contact_radius: 0.0,
            volume: 0.0,
        })
        .collect();
    let mut segments = Vec::with_capacity(n_seg);
    for i in 0..n_seg {
        let l0 = arc[i + 1] - arc[i];
        let sec = profile.averaged(arc[i], arc[i + 1]);
        segments.push(RodSegment { rest_length: l0, ea: sec.ea, ei: sec.ei, drag_diameter: profile.base_outer });
        for j in [i, i + 1] {
            nodes[j].mass += 0.5 * line_mass * l0;
            nodes[j].volume += 0.5 * line_volume * l0;
        }
    }

    let nearest = |s: f64| -> usize {
        let mut best = 0;
        for (i, &a) in arc.iter().enumerate() {
            if (a - s).abs() < (arc[best] - s).abs() {
                best = i;
            }
        }
        best
    };

    let mut beads = Vec::new();
    // A magnetic layer acts as distributed dipoles, one per node share.
    if design.variant == Variant::MagneticLayer && design.layer_area() > 0.0 {
        for i in 0..nodes.len() {
            let share = 0.5 * (if i > 0 { arc[i] - arc[i - 1] } else { 0.0 } + if i < n_seg { arc[i + 1] - arc[i] } else { 0.0 });
            let volume = design.layer_area() * share;
            if volume > 0.0 {
                beads.push(Bead { node: i, volume, dipole_magnitude: 0.0, magnetization_dir_body: Vec3::x() });
            }
        }
    }
    if let Some(b) = &design.bead_geometry {
        for s in design.bead_positions() {
            let node = nearest(s);
            nodes[node].mass += b.bead_volume * mat.density_composite;
            nodes[node].volume += b.bead_volume;
            nodes[node].drag_radius = nodes[node].drag_radius.max(b.equivalent_radius());
            beads.push(Bead { node, volume: b.bead_volume, dipole_magnitude: 0.0, magnetization_dir_body: Vec3::x() });
        }
    }
    if let Some(h) = design.head_diameter {
        let node = n_seg;
        let volume = design.head_volume();
        nodes[node].mass += volume * mat.density_composite;
        nodes[node].volume += volume;
        nodes[node].drag_radius = nodes[node].drag_radius.max(0.5 * h);
        beads.push(Bead { node, volume, dipole_magnitude: 0.0, magnetization_dir_body: Vec3::x() });
    }
    for i in 0..nodes.len() {
        let mut r = nodes[i].drag_radius;
        if i > 0 {
            r = r.max(0.5 * segments[i - 1].drag_diameter);
        }
        if i < n_seg {
            r = r.max(0.5 * segments[i].drag_diameter);
        }
        nodes[i].contact_radius = r;
    }

    let rod = DiscreteRod { nodes, segments, beads, length };
    let rod = assign_magnetization(&rod, mat.remanence, policy)?;
    rod.validate()?;
    Ok(rod)
}

/// Rest tangent at a node: mean of the adjacent edge directions.
fn rest_tangent(rod: &DiscreteRod, i: usize) -> Vec3 {
    let n = rod.nodes.len();
    let p = |k: usize| rod.nodes[k].rest_position;
    let mut t = Vec3::zeros();
    if i > 0 {
        t += (p(i) - p(i - 1)).normalize();
    }
    if i + 1 < n {
        t += (p(i + 1) - p(i)).normalize();
    }
    t.normalize()
}

/// Sets every bead's dipole to `B_r V / mu0` with a direction chosen by `policy`.
pub fn assign_magnetization(rod: &DiscreteRod, remanence: f64, policy: MagnetizationPolicy) -> Result<DiscreteRod> {
    if !(remanence > 0.0 && remanence.is_finite()) {
        return Err(domain(format!("remanence must be positive, got {remanence}")));
    }
    let custom = match policy {
        MagnetizationPolicy::Custom(dir) => {
            let n = dir.norm();
            if !(n > 0.0) {
                return Err(domain("custom magnetisation direction must be non-zero"));
            }
            Some(dir / n)
        }
        _ => None,
    };
    let mut out = rod.clone();
    for (k, bead) in out.beads.iter_mut().enumerate() {
        if !(bead.volume > 0.0) {
            return Err(domain(format!("bead {k} has zero volume")));
        }
        bead.dipole_magnitude = remanence * bead.volume / MU0;
        bead.magnetization_dir_body = match policy {
            MagnetizationPolicy::AlongBody => rest_tangent(rod, bead.node),
            MagnetizationPolicy::TransverseUniform => Vec3::z(),
            MagnetizationPolicy::Custom(_) => custom.unwrap(),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabrication::{paper_design, BeadGeometry, MaterialSet, Variant};
    use approx::assert_relative_eq;

    fn bare(d: f64, length: f64) -> RobotDesign {
        RobotDesign {
            id: "bare".into(),
            variant: Variant::MagneticLayer,
            fiber_diameter: d,
            length,
            bead_geometry: None,
            layer_thickness: Some(1e-12),
            head_diameter: None,
            materials: MaterialSet::default(),
            warnings: vec![],
        }
    }

    fn boas_big_head_770() -> RobotDesign {
        RobotDesign {
            id: "b".into(),
            variant: Variant::BoasBigHead,
            fiber_diameter: 100e-6,
            length: 15.4e-3,
            bead_geometry: Some(BeadGeometry::with_volume(100e-6, 1.814e-11, 1.0).unwrap()),
            layer_thickness: None,
            head_diameter: Some(350e-6),
            materials: MaterialSet::default(),
            warnings: vec![],
        }
    }

    #[test]
    fn discretize_counts() {
        let rod = discretize(&bare(100e-6, 20e-3), 0.5e-3).unwrap();
        assert_eq!(rod.segments.len(), 40);
        assert_eq!(rod.nodes.len(), 41);
    }

    #[test]
    fn beads_land_on_every_second_node() {
        let rod = discretize(&boas_big_head_770(), 0.385e-3).unwrap();
        assert_eq!(rod.segments.len(), 40);
        let body: Vec<usize> = rod.beads.iter().map(|b| b.node).collect();
        // 20 body beads at 2, 4, ..., 40 and the head at 40.
        let expected: Vec<usize> = (1..=20).map(|k| 2 * k).chain(std::iter::once(40)).collect();
        assert_eq!(body, expected);
    }

    #[test]
    fn fiber_big_head_has_one_dipole() {
        let rod = discretize(&paper_design(Variant::FiberBigHead), 0.3e-3).unwrap();
        assert_eq!(rod.beads.len(), 1);
        assert_eq!(rod.beads[0].node, rod.head_node());
    }

    #[test]
    fn too_coarse_is_a_resolution_error() {
        let err = discretize(&bare(100e-6, 20e-3), 2.5e-3).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
    }

    #[test]
    fn section_stiffness_examples() {
        let d = bare(100e-6, 20e-3);
        let mut d0 = d.clone();
        d0.layer_thickness = Some(1e-300);
        assert_relative_eq!(composite_section_stiffness(&d0, 0.0).unwrap().ei, 1.080e-10, max_relative = 1e-3);
        let mut coated = d.clone();
        coated.layer_thickness = Some(20e-6);
        assert_relative_eq!(composite_section_stiffness(&coated, 1e-3).unwrap().ei, 1.136e-10, max_relative = 1e-3);
        let ea = composite_section_stiffness(&d0, 0.0).unwrap().ea;
        assert_relative_eq!(ea, 0.1728, max_relative = 1e-3);
        assert!(composite_section_stiffness(&d, 21e-3).is_err());
    }

    #[test]
    fn dipole_examples() {
        // sphere of radius 110 µm at 5 mT
        let v = 4.0 / 3.0 * PI * 1.1e-4f64.powi(3);
        assert_relative_eq!(5e-3 * v / MU0, 2.218e-8, max_relative = 1e-3);
        let rod = discretize(&boas_big_head_770(), 0.385e-3).unwrap();
        assert_relative_eq!(rod.beads[0].dipole_magnitude, 7.218e-8, max_relative = 1e-3);
        assert!(assign_magnetization(&rod, 0.0, MagnetizationPolicy::AlongBody).is_err());
    }

    #[test]
    fn mass_is_conserved_across_resolutions() {
        for v in Variant::ALL {
            let design = paper_design(v);
            for target in [0.1e-3, 0.25e-3, 0.37e-3, 1.2e-3] {
                let rod = discretize(&design, target).unwrap();
                assert_relative_eq!(rod.total_mass(), design.mass(), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn dipoles_scale_linearly_with_remanence() {
        let rod = discretize(&paper_design(Variant::BoasBigHead), 0.25e-3).unwrap();
        let a = assign_magnetization(&rod, 5e-3, MagnetizationPolicy::TransverseUniform).unwrap();
        let b = assign_magnetization(&rod, 15e-3, MagnetizationPolicy::TransverseUniform).unwrap();
        for (x, y) in a.beads.iter().zip(&b.beads) {
            assert_relative_eq!(y.dipole_magnitude, 3.0 * x.dipole_magnitude, max_relative = 1e-15);
            assert_eq!(x.magnetization_dir_body, Vec3::z());
        }
    }

    #[test]
    fn discretised_compliance_converges_to_profile_integral() {
        // Tip compliance F * int (L - s)^2 / EI(s) ds of a beaded body.
        let design = paper_design(Variant::BoasBigHead);
        let l = design.length;
        let fine = {
            let n = 200_000;
            let h = l / n as f64;
            (0..n)
                .map(|k| {
                    let s = (k as f64 + 0.5) * h;
                    (l - s).powi(2) / composite_section_stiffness(&design, s).unwrap().ei * h
                })
                .sum::<f64>()
        };
        let discrete = |target: f64| {
            let rod = discretize(&design, target).unwrap();
            let mut s = 0.0;
            let mut acc = 0.0;
            for seg in &rod.segments {
                let (a, b) = (s, s + seg.rest_length);
                acc += ((l - a).powi(3) - (l - b).powi(3)) / 3.0 / seg.ei;
                s = b;
            }
            (acc - fine).abs() / fine
        };
        let errs: Vec<f64> = [1.0e-3, 0.5e-3, 0.1e-3, 0.02e-3].iter().map(|&t| discrete(t)).collect();
        assert!(errs[3] < 1e-3, "{errs:?}");
        assert!(errs[3] < errs[0], "{errs:?}");
    }

    #[test]
    fn placement_rotates_body_frame() {
        let rod = discretize(&paper_design(Variant::BoasBigHead), 0.5e-3).unwrap();
        let placed = rod.placed(Vec3::new(1.0, 2.0, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!((placed.nodes[0].rest_position - Vec3::new(1.0, 2.0, 0.0)).norm() < 1e-15);
        let tip = placed.nodes[placed.head_node()].rest_position;
        assert!((tip - Vec3::new(1.0, 2.0 + 15e-3, 0.0)).norm() < 1e-12);
        for b in &placed.beads {
            assert!((b.magnetization_dir_body - Vec3::y()).norm() < 1e-12);
        }
    }
}
