//! Fabrication laws and design cards.
//!
//! Thermal drawing sets the fibre diameter (`D = C / sqrt(v)`), a coated
//! liquid film breaks into beads when it is thicker than `(sqrt(2) - 1) D`,
//! and the resulting beads are spaced `(7.7 ± 1.4) D` apart. The functions
//! here evaluate those laws in SI units and compose them into a
//! [`RobotDesign`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Nominal bead spacing in fibre diameters.
pub const SPACING_NOMINAL: f64 = 7.7;
/// Half-width of the bead spacing band in fibre diameters.
pub const SPACING_SPREAD: f64 = 1.4;

/// `D = C / sqrt(v)` with a calibrated draw constant `C` (m·(m/s)^½).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalDrawModel {
    pub draw_constant: f64,
}

impl ThermalDrawModel {
    pub fn new(draw_constant: f64) -> Result<Self> {
        if !(draw_constant > 0.0 && draw_constant.is_finite()) {
            return Err(domain(format!("draw constant must be positive, got {draw_constant}")));
        }
        Ok(Self { draw_constant })
    }

    /// Fits `C` to one observed (diameter, speed) pair.
    pub fn calibrate(diameter: f64, speed: f64) -> Result<Self> {
        if !(diameter > 0.0) || !(speed > 0.0) {
            return Err(domain(format!(
                "calibration needs positive diameter and speed, got D = {diameter}, v = {speed}"
            )));
        }
        Self::new(diameter * speed.sqrt())
    }

    pub fn predict_diameter(&self, speed: f64) -> Result<f64> {
        if !(speed > 0.0) {
            return Err(domain(format!("draw speed must be positive, got {speed}")));
        }
        Ok(self.draw_constant / speed.sqrt())
    }

    /// Relative residual of an observation against the model, `(D_pred - D_obs) / D_obs`.
    pub fn residual(&self, diameter: f64, speed: f64) -> Result<f64> {
        Ok((self.predict_diameter(speed)? - diameter) / diameter)
    }
}

/// Critical film thickness above which the coating breaks into beads.
pub fn critical_film_thickness(fiber_diameter: f64) -> Result<f64> {
    if !(fiber_diameter > 0.0) {
        return Err(domain(format!("fibre diameter must be positive, got {fiber_diameter}")));
    }
    Ok((2f64.sqrt() - 1.0) * fiber_diameter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilmOutcome {
    UniformLayer,
    Beads,
}

pub fn film_breakup_decision(fiber_diameter: f64, film_thickness: f64) -> Result<FilmOutcome> {
    let critical = critical_film_thickness(fiber_diameter)?;
    if !(film_thickness >= 0.0) {
        return Err(domain(format!("film thickness must be non-negative, got {film_thickness}")));
    }
    Ok(if film_thickness > critical {
        FilmOutcome::Beads
    } else {
        FilmOutcome::UniformLayer
    })
}

/// A coating film on a fibre. `critical_thickness` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmSpec {
    pub fiber_diameter: f64,
    pub film_thickness: f64,
    pub critical_thickness: f64,
}

impl FilmSpec {
    pub fn new(fiber_diameter: f64, film_thickness: f64) -> Result<Self> {
        let critical_thickness = critical_film_thickness(fiber_diameter)?;
        if !(film_thickness >= 0.0) {
            return Err(domain(format!("film thickness must be non-negative, got {film_thickness}")));
        }
        Ok(Self { fiber_diameter, film_thickness, critical_thickness })
    }

    pub fn outcome(&self) -> FilmOutcome {
        if self.film_thickness > self.critical_thickness {
            FilmOutcome::Beads
        } else {
            FilmOutcome::UniformLayer
        }
    }

    /// Film volume per unit fibre length, m².
    pub fn annular_area(&self) -> f64 {
        PI * self.film_thickness * (self.fiber_diameter + self.film_thickness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeadGeometry {
    /// Nominal centre-to-centre spacing, m.
    pub spacing: f64,
    /// `[6.3 D, 9.1 D]`, m.
    pub spacing_interval: (f64, f64),
    /// Volume of one bead, m³.
    pub bead_volume: f64,
    /// Minor over major axis of the (prolate) bead.
    pub axes_ratio: f64,
}

impl BeadGeometry {
    /// Beads of a given volume on a fibre of diameter `fiber_diameter`, spaced nominally.
    pub fn with_volume(fiber_diameter: f64, bead_volume: f64, axes_ratio: f64) -> Result<Self> {
        if !(fiber_diameter > 0.0) {
            return Err(domain("fibre diameter must be positive"));
        }
        if !(bead_volume > 0.0) {
            return Err(domain("bead volume must be positive"));
        }
        if !(axes_ratio > 0.0 && axes_ratio <= 1.0) {
            return Err(domain(format!("axes ratio must lie in (0, 1], got {axes_ratio}")));
        }
        Ok(Self {
            spacing: SPACING_NOMINAL * fiber_diameter,
            spacing_interval: (
                (SPACING_NOMINAL - SPACING_SPREAD) * fiber_diameter,
                (SPACING_NOMINAL + SPACING_SPREAD) * fiber_diameter,
            ),
            bead_volume,
            axes_ratio,
        })
    }

    /// Minor-axis diameter of a prolate spheroid with this volume and axes ratio.
    pub fn minor_diameter(&self) -> f64 {
        (6.0 * self.bead_volume * self.axes_ratio / PI).cbrt()
    }

    pub fn major_diameter(&self) -> f64 {
        self.minor_diameter() / self.axes_ratio
    }

    /// Radius of the sphere with the same volume (used for Stokes drag).
    pub fn equivalent_radius(&self) -> f64 {
        0.5 * (6.0 * self.bead_volume / PI).cbrt()
    }
}

/// Bead layout from the film instability. All film per wavelength collects
/// into one bead, so `bead_volume = pi h (D + h) lambda`.
pub fn predict_bead_geometry(fiber_diameter: f64, film_thickness: f64, axes_ratio: f64) -> Result<BeadGeometry> {
    let film = FilmSpec::new(fiber_diameter, film_thickness)?;
    if film.outcome() != FilmOutcome::Beads {
        return Err(Error::Precondition(format!(
            "film of thickness {film_thickness:e} m on a {fiber_diameter:e} m fibre is stable \
             (critical thickness (sqrt(2)-1)·D = {:e} m); no beads form",
            film.critical_thickness
        )));
    }
    let spacing = SPACING_NOMINAL * fiber_diameter;
    BeadGeometry::with_volume(fiber_diameter, film.annular_area() * spacing, axes_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    BoasBigHead,
    Boas,
    MagneticLayer,
    FiberBigHead,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::BoasBigHead, Variant::Boas, Variant::MagneticLayer, Variant::FiberBigHead];

    pub fn has_beads(self) -> bool {
        matches!(self, Variant::BoasBigHead | Variant::Boas)
    }

    pub fn has_head(self) -> bool {
        matches!(self, Variant::BoasBigHead | Variant::FiberBigHead)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::BoasBigHead => "boas-big-head",
            Variant::Boas => "boas",
            Variant::MagneticLayer => "magnetic-layer",
            Variant::FiberBigHead => "fiber-big-head",
        }
    }
}

/// Material constants. Defaults: thermoplastic fibre 22 MPa, magnetic
/// composite 0.4 MPa, bead remanence 5 mT, hot-melt fibre density
/// 980 kg/m³ and composite (1:1 Ecoflex/NdFeB by mass) 1870 kg/m³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSet {
    pub e_fiber: f64,
    pub e_composite: f64,
    pub remanence: f64,
    pub density_fiber: f64,
    pub density_composite: f64,
}

impl Default for MaterialSet {
    fn default() -> Self {
        Self {
            e_fiber: 22.0e6,
            e_composite: 0.4e6,
            remanence: 5.0e-3,
            density_fiber: 980.0,
            density_composite: 1870.0,
        }
    }
}

impl MaterialSet {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("e_fiber", self.e_fiber),
            ("e_composite", self.e_composite),
            ("remanence", self.remanence),
            ("density_fiber", self.density_fiber),
            ("density_composite", self.density_composite),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(domain(format!("material {name} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// The designable object: one of the four variants with its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDesign {
    pub id: String,
    pub variant: Variant,
    pub fiber_diameter: f64,
    pub length: f64,
    pub bead_geometry: Option<BeadGeometry>,
    pub layer_thickness: Option<f64>,
    pub head_diameter: Option<f64>,
    pub materials: MaterialSet,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RobotDesign {
    pub fn validate(&self) -> Result<()> {
        self.materials.validate()?;
        if !(self.fiber_diameter > 0.0) || !(self.length > 0.0) {
            return Err(domain("fibre diameter and length must be positive"));
        }
        if self.length <= self.fiber_diameter {
            return Err(Error::Slenderness { length: self.length, diameter: self.fiber_diameter });
        }
        let v = self.variant;
        if v.has_beads() != self.bead_geometry.is_some() {
            return Err(Error::Invalid(format!(
                "variant {} {} bead geometry",
                v.name(),
                if v.has_beads() { "requires" } else { "must not carry" }
            )));
        }
        if v.has_head() != self.head_diameter.is_some() {
            return Err(Error::Invalid(format!(
                "variant {} {} a head diameter",
                v.name(),
                if v.has_head() { "requires" } else { "must not carry" }
            )));
        }
        if (v == Variant::MagneticLayer) != self.layer_thickness.is_some() {
            return Err(Error::Invalid(format!(
                "layer thickness is only (and always) set for the magnetic-layer variant, not {}",
                v.name()
            )));
        }
        if let Some(head) = self.head_diameter {
            if head < self.fiber_diameter {
                return Err(domain(format!(
                    "head diameter {head:e} m is smaller than the fibre diameter {:e} m",
                    self.fiber_diameter
                )));
            }
        }
        if let Some(t) = self.layer_thickness {
            if !(t > 0.0) {
                return Err(domain("layer thickness must be positive"));
            }
        }
        if let Some(b) = &self.bead_geometry {
            if !(b.bead_volume > 0.0) || !(b.axes_ratio > 0.0 && b.axes_ratio <= 1.0) || !(b.spacing > 0.0) {
                return Err(domain("bead geometry must have positive volume and spacing, axes ratio in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Aspect ratio above 100, as for the prototypes the model targets.
    pub fn is_slender(&self) -> bool {
        self.length / self.fiber_diameter > 100.0
    }

    /// Bead arc positions `k·λ`, `k = 1..=floor(L/λ)`, measured from the tail.
    pub fn bead_positions(&self) -> Vec<f64> {
        match &self.bead_geometry {
            Some(b) => {
                let n = (self.length / b.spacing + 1e-9).floor() as usize;
                (1..=n).map(|k| (k as f64 * b.spacing).min(self.length)).collect()
            }
            None => Vec::new(),
        }
    }

    pub fn head_volume(&self) -> f64 {
        self.head_diameter.map_or(0.0, |d| PI * d.powi(3) / 6.0)
    }

    /// Cross-section of the uniform composite layer (zero without a layer), m².
    pub fn layer_area(&self) -> f64 {
        self.layer_thickness.map_or(0.0, |t| {
            let d = self.fiber_diameter;
            PI / 4.0 * ((d + 2.0 * t).powi(2) - d * d)
        })
    }

    pub fn fiber_area(&self) -> f64 {
        PI / 4.0 * self.fiber_diameter.powi(2)
    }

    /// Total magnetic composite volume (beads, head, layer), m³.
    pub fn composite_volume(&self) -> f64 {
        let beads = self.bead_geometry.map_or(0.0, |b| b.bead_volume * self.bead_positions().len() as f64);
        beads + self.head_volume() + self.layer_area() * self.length
    }

    pub fn mass(&self) -> f64 {
        self.fiber_area() * self.length * self.materials.density_fiber
            + self.composite_volume() * self.materials.density_composite
    }

    /// Largest outer diameter anywhere on the body.
    pub fn max_diameter(&self) -> f64 {
        let mut d = self.fiber_diameter;
        if let Some(t) = self.layer_thickness {
            d = d.max(self.fiber_diameter + 2.0 * t);
        }
        if let Some(b) = &self.bead_geometry {
            d = d.max(b.minor_diameter());
        }
        if let Some(h) = self.head_diameter {
            d = d.max(h);
        }
        d
    }
}

/// Fabrication recipe feeding [`design_from_fabrication`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricationInputs {
    pub draw: ThermalDrawModel,
    pub draw_speed: f64,
    pub film_thickness: f64,
    pub head_diameter: Option<f64>,
    pub length: f64,
    pub axes_ratio: f64,
}

/// Chains the draw, film-stability and bead-spacing laws into a design card.
pub fn design_from_fabrication(id: &str, variant: Variant, inputs: &FabricationInputs) -> Result<RobotDesign> {
    let diameter = inputs.draw.predict_diameter(inputs.draw_speed)?;
    let outcome = film_breakup_decision(diameter, inputs.film_thickness)?;
    let mut warnings = Vec::new();

    let bead_geometry = if variant.has_beads() {
        Some(predict_bead_geometry(diameter, inputs.film_thickness, inputs.axes_ratio)?)
    } else {
        None
    };

    let layer_thickness = match variant {
        Variant::MagneticLayer => {
            if !(inputs.film_thickness > 0.0) {
                return Err(domain("magnetic-layer variant needs a positive film thickness"));
            }
            if outcome == FilmOutcome::Beads {
                warnings.push(format!(
                    "film of {:e} m exceeds the critical thickness {:e} m; the layer must be frozen \
                     magnetically before it breaks into beads",
                    inputs.film_thickness,
                    critical_film_thickness(diameter)?
                ));
            }
            Some(inputs.film_thickness)
        }
        _ => None,
    };

    if variant == Variant::FiberBigHead && inputs.film_thickness > 0.0 {
        warnings.push("fiber-big-head ignores the body film thickness".to_owned());
    }

    let head_diameter = if variant.has_head() {
        let head = inputs
            .head_diameter
            .ok_or_else(|| Error::Invalid(format!("variant {} requires a head diameter", variant.name())))?;
        Some(head)
    } else {
        None
    };

    let design = RobotDesign {
        id: id.to_owned(),
        variant,
        fiber_diameter: diameter,
        length: inputs.length,
        bead_geometry,
        layer_thickness,
        head_diameter,
        materials: MaterialSet::default(),
        warnings,
    };
    design.validate()?;
    Ok(design)
}

/// Fibre diameter shared by the bead-carrying reference designs (the thin
/// tensile specimen), m.
pub const PAPER_FIBER_DIAMETER: f64 = 50e-6;
/// Fibre under the uniform magnetic layer (the coated tensile specimen), m.
pub const PAPER_LAYER_FIBER_DIAMETER: f64 = 90e-6;
pub const PAPER_LAYER_THICKNESS: f64 = 20e-6;
pub const PAPER_BEAD_DIAMETER: f64 = 100e-6;
pub const PAPER_HEAD_DIAMETER: f64 = 220e-6;
pub const PAPER_LENGTH: f64 = 15e-3;

/// The four characterization prototypes: 15 mm long, 220 µm maximum
/// diameter, 100 µm body beads.
pub fn paper_design(variant: Variant) -> RobotDesign {
    let fiber = match variant {
        Variant::MagneticLayer => PAPER_LAYER_FIBER_DIAMETER,
        _ => PAPER_FIBER_DIAMETER,
    };
    let bead_geometry = variant.has_beads().then(|| {
        BeadGeometry::with_volume(fiber, PI * PAPER_BEAD_DIAMETER.powi(3) / 6.0, 1.0)
            .expect("reference bead geometry is valid")
    });
    RobotDesign {
        id: format!("{}-paper", variant.name()),
        variant,
        fiber_diameter: fiber,
        length: PAPER_LENGTH,
        bead_geometry,
        layer_thickness: (variant == Variant::MagneticLayer).then_some(PAPER_LAYER_THICKNESS),
        head_diameter: variant.has_head().then_some(PAPER_HEAD_DIAMETER),
        materials: MaterialSet::default(),
        warnings: Vec::new(),
    }
}

/// Names accepted by [`builtin_design`].
pub fn builtin_design_names() -> Vec<String> {
    Variant::ALL.iter().map(|v| format!("{}-paper", v.name())).collect()
}

pub fn builtin_design(name: &str) -> Result<RobotDesign> {
    Variant::ALL
        .iter()
        .find(|v| format!("{}-paper", v.name()) == name)
        .map(|v| paper_design(*v))
        .ok_or_else(|| Error::UnknownName {
            kind: "design",
            name: name.to_owned(),
            suggestions: crate::scenario::suggest(name, &builtin_design_names()),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const UM: f64 = 1e-6;
    const MM_S: f64 = 1e-3;

    /// Draw constant in µm·(mm/s)^½ converted from SI.
    fn c_in_um_mm(model: &ThermalDrawModel) -> f64 {
        model.draw_constant / UM / MM_S.sqrt()
    }

    #[test]
    fn calibrate_draw_constant_examples() {
        let m = ThermalDrawModel::calibrate(622.56 * UM, 6.0 * MM_S).unwrap();
        assert_relative_eq!(c_in_um_mm(&m), 1524.95, epsilon = 0.01);
        assert_relative_eq!(m.predict_diameter(6.0 * MM_S).unwrap(), 622.56 * UM, max_relative = 1e-15);

        let m = ThermalDrawModel::calibrate(1.0, 1.0).unwrap();
        assert_eq!(m.draw_constant, 1.0);
        let m = ThermalDrawModel::calibrate(100.0 * UM, 25.0 * MM_S).unwrap();
        assert_relative_eq!(c_in_um_mm(&m), 500.0, max_relative = 1e-12);
    }

    #[test]
    fn calibrate_rejects_non_positive() {
        assert!(matches!(ThermalDrawModel::calibrate(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(ThermalDrawModel::calibrate(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn predict_fiber_diameter_examples() {
        let c = 1524.95 * UM * MM_S.sqrt();
        let m = ThermalDrawModel::new(c).unwrap();
        assert_relative_eq!(m.predict_diameter(24.0 * MM_S).unwrap() / UM, 311.28, epsilon = 0.005);
        assert_relative_eq!(m.predict_diameter(135.0 * MM_S).unwrap() / UM, 131.25, epsilon = 0.005);
        assert_eq!(ThermalDrawModel::new(1.0).unwrap().predict_diameter(1.0).unwrap(), 1.0);
        assert!(m.predict_diameter(0.0).is_err());
    }

    #[test]
    fn reported_draw_endpoints_are_inconsistent() {
        // 77.61 µm at 135 mm/s does not follow from 622.56 µm at 6 mm/s.
        let m = ThermalDrawModel::calibrate(622.56 * UM, 6.0 * MM_S).unwrap();
        let r = m.residual(77.61 * UM, 135.0 * MM_S).unwrap();
        assert!(r > 0.6, "residual {r}");
    }

    #[test]
    fn critical_thickness_examples() {
        assert_relative_eq!(critical_film_thickness(100.0 * UM).unwrap() / UM, 41.42, epsilon = 0.005);
        assert_relative_eq!(critical_film_thickness(220.0 * UM).unwrap() / UM, 91.13, epsilon = 0.005);
        assert!(critical_film_thickness(1e-300).unwrap() < 1e-299);
        assert!(critical_film_thickness(0.0).is_err());
    }

    #[test]
    fn breakup_decision_examples() {
        assert_eq!(film_breakup_decision(100.0 * UM, 50.0 * UM).unwrap(), FilmOutcome::Beads);
        assert_eq!(film_breakup_decision(100.0 * UM, 30.0 * UM).unwrap(), FilmOutcome::UniformLayer);
        assert_eq!(film_breakup_decision(100.0 * UM, 0.0).unwrap(), FilmOutcome::UniformLayer);
        assert!(film_breakup_decision(100.0 * UM, -1.0).is_err());
    }

    #[test]
    fn bead_geometry_examples() {
        let b = predict_bead_geometry(100.0 * UM, 50.0 * UM, 1.0).unwrap();
        assert_relative_eq!(b.spacing / UM, 770.0, max_relative = 1e-12);
        assert_relative_eq!(b.spacing_interval.0 / UM, 630.0, max_relative = 1e-12);
        assert_relative_eq!(b.spacing_interval.1 / UM, 910.0, max_relative = 1e-12);
        // pi * 50e-6 * 150e-6 * 770e-6
        assert_relative_eq!(b.bead_volume, 1.814e-11, max_relative = 1e-3);

        let tiny = predict_bead_geometry(1e-9, 1e-9, 1.0).unwrap();
        assert!(tiny.spacing < 1e-8);
    }

    #[test]
    fn stable_film_names_the_instability_threshold() {
        let err = predict_bead_geometry(100.0 * UM, 30.0 * UM, 1.0).unwrap_err();
        match err {
            Error::Precondition(msg) => assert!(msg.contains("(sqrt(2)-1)")),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn inputs(h: f64, head: Option<f64>) -> FabricationInputs {
        FabricationInputs {
            draw: ThermalDrawModel::new(1524.95 * UM * MM_S.sqrt()).unwrap(),
            draw_speed: 135.0 * MM_S,
            film_thickness: h,
            head_diameter: head,
            length: 20e-3,
            axes_ratio: 1.0,
        }
    }

    #[test]
    fn design_from_fabrication_examples() {
        let d = design_from_fabrication("x", Variant::BoasBigHead, &inputs(60.0 * UM, Some(350.0 * UM))).unwrap();
        assert_relative_eq!(d.fiber_diameter / UM, 131.25, epsilon = 0.005);
        assert_relative_eq!(d.bead_geometry.unwrap().spacing / UM, 1010.6, epsilon = 0.05);

        let d = design_from_fabrication("x", Variant::FiberBigHead, &inputs(0.0, Some(350.0 * UM))).unwrap();
        assert!(d.bead_geometry.is_none());
        assert!(d.bead_positions().is_empty());

        let d = design_from_fabrication("x", Variant::MagneticLayer, &inputs(20.0 * UM, None)).unwrap();
        assert_eq!(d.layer_thickness, Some(20.0 * UM));
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn design_from_fabrication_errors() {
        // 40 µm < (sqrt 2 - 1) * 131.25 µm, so no beads form.
        let err = design_from_fabrication("x", Variant::Boas, &inputs(40.0 * UM, None)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let d = design_from_fabrication("x", Variant::MagneticLayer, &inputs(60.0 * UM, None)).unwrap();
        assert_eq!(d.warnings.len(), 1);
        assert!(design_from_fabrication("x", Variant::FiberBigHead, &inputs(0.0, None)).is_err());
    }

    #[test]
    fn paper_designs_are_valid_and_slender() {
        for v in Variant::ALL {
            let d = paper_design(v);
            d.validate().unwrap();
            assert!(d.is_slender());
            assert!(d.max_diameter() <= PAPER_HEAD_DIAMETER + 1e-12);
        }
        assert_eq!(builtin_design("boas-big-head-paper").unwrap().variant, Variant::BoasBigHead);
        match builtin_design("boas-big-head-papr") {
            Err(Error::UnknownName { suggestions, .. }) => assert_eq!(suggestions[0], "boas-big-head-paper"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
