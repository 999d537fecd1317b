//! Scenario files: a versioned JSON description of a complete run.
//!
//! Every dimensional value is a string with a unit suffix (`"15 mm"`,
//! `"5 mT"`, `"2e-6 s"`); bare numbers are rejected. Unknown keys are
//! rejected. Errors carry a JSON pointer into the document.
//!
//! ```
//! use magworm::scenario::Scenario;
//! let s = Scenario::from_json(r#"{"schema": "1", "design": "boas-big-head-paper", "scene": "tank"}"#).unwrap();
//! assert_eq!(s.world.scene.name, "tank");
//! // the resolved dump spells out every default and re-parses to the same world
//! let again = Scenario::from_json(&s.resolved_json()).unwrap();
//! assert_eq!(again.world, s.world);
//! ```
//!
//! Names are looked up as: an existing file path, then `<name>.json` in the
//! directories of `MAGWORM_SCENE_PATH`, then the built-in scenarios.

use std::fmt;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::engine::{
    steps_for, Controller, ExternalController, MagnetPose, RotatingField, ScriptedPath, SimConfig, Simulation, Waypoint, World,
};
use crate::environment::{build_scene, AmbientFlow, CargoBody, TargetRegion};
use crate::error::{Error, Result};
use crate::experiments::{small_magnet_magnetization, SMALL_MAGNET_HEIGHT, SMALL_MAGNET_RADIUS};
use crate::fabrication::{
    builtin_design, design_from_fabrication, BeadGeometry, FabricationInputs, MaterialSet, RobotDesign,
    ThermalDrawModel, Variant,
};
use crate::hydro::Fluid;
use crate::magnetics::{calibrate_magnet_magnetization, MagnetSource};
use crate::robot::{discretize_with, MagnetizationPolicy};
use crate::trajectory::Trajectory;
use crate::units::{format_si, parse_quantity, Dimension, Vec3};

pub const SCHEMA: &str = "1";
pub const SCENE_PATH_VAR: &str = "MAGWORM_SCENE_PATH";

/// Built-in scenario files, by name.
pub const BUILTIN_SCENARIOS: [(&str, &str); 5] = [
    ("serpentine-navigation", include_str!("../scenarios/serpentine-navigation.json")),
    ("aneurysm-embolization", include_str!("../scenarios/aneurysm-embolization.json")),
    ("cargo-transport", include_str!("../scenarios/cargo-transport.json")),
    ("three-holes", include_str!("../scenarios/three-holes.json")),
    ("tank-speed", include_str!("../scenarios/tank-speed.json")),
];

pub const DEFAULT_SEGMENT_LENGTH: f64 = 0.5e-3;
pub const DEFAULT_DURATION: f64 = 0.1;
/// Waypoint spacing of resolved route controllers, m.
pub const ROUTE_WAYPOINT_STEP: f64 = 0.1e-3;

// ---------------------------------------------------------------- quantities

pub trait Dim {
    const DIM: Dimension;
}

macro_rules! dims {
    ($($name:ident => $d:ident),* $(,)?) => {
        $(
            #[derive(Debug, Clone, Copy, PartialEq)]
            pub struct $name;
            impl Dim for $name {
                const DIM: Dimension = Dimension::$d;
            }
        )*
    };
}

dims! {
    Length => Length, Speed => Speed, Time => Time, Flux => FluxDensity, Magnetization => Magnetization,
    Modulus => Modulus, Mass => Mass, Density => Density, Viscosity => Viscosity, Frequency => Frequency,
    Stiffness => Stiffness, Volume => Volume,
}

/// A unit-suffixed quantity, stored in SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q<D>(pub f64, PhantomData<D>);

impl<D> Q<D> {
    pub fn new(si: f64) -> Self {
        Q(si, PhantomData)
    }
}

impl<D: Dim> Serialize for Q<D> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_si(self.0, D::DIM))
    }
}

impl<'de, D: Dim> Deserialize<'de> for Q<D> {
    fn deserialize<De: Deserializer<'de>>(d: De) -> std::result::Result<Self, De::Error> {
        struct V<D>(PhantomData<D>);
        impl<D: Dim> V<D> {
            fn bare<E: de::Error>(v: impl fmt::Display) -> E {
                E::custom(format!("missing unit suffix: write e.g. \"{v} {}\"", D::DIM.si_suffix()))
            }
        }
        impl<'de, D: Dim> Visitor<'de> for V<D> {
            type Value = Q<D>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a string with a unit suffix such as \"1 {}\"", D::DIM.si_suffix())
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Q<D>, E> {
                parse_quantity(v, D::DIM).map(Q::new).map_err(|e| E::custom(e.to_string()))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Q<D>, E> {
                Err(Self::bare(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Q<D>, E> {
                Err(Self::bare(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Q<D>, E> {
                Err(Self::bare(v))
            }
        }
        d.deserialize_any(V(PhantomData))
    }
}

fn vec3<D>(q: &[Q<D>; 3]) -> Vec3 {
    Vec3::new(q[0].0, q[1].0, q[2].0)
}

fn qvec<D>(v: &Vec3) -> [Q<D>; 3] {
    [Q::new(v.x), Q::new(v.y), Q::new(v.z)]
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

// ---------------------------------------------------------------- file schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Name of a built-in design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_card: Option<DesignCard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fabrication: Option<FabricationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_length: Option<Q<Length>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetization: Option<MagnetizationPolicy>,
    pub scene: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid: Option<FluidSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_stiffness: Option<Q<Stiffness>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_flow: Option<FlowSpec>,
    /// Replaces the scene's cargo list when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cargo: Option<Vec<CargoSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnet: Option<MagnetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Outputs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCard {
    pub id: String,
    pub variant: Variant,
    pub fiber_diameter: Q<Length>,
    pub length: Q<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beads: Option<BeadSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_thickness: Option<Q<Length>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_diameter: Option<Q<Length>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub materials: Option<MaterialSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeadSpec {
    pub spacing: Q<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_interval: Option<[Q<Length>; 2]>,
    pub volume: Q<Volume>,
    pub axes_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub e_fiber: Q<Modulus>,
    pub e_composite: Q<Modulus>,
    pub remanence: Q<Flux>,
    pub density_fiber: Q<Density>,
    pub density_composite: Q<Density>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FabricationSpec {
    pub id: String,
    pub variant: Variant,
    /// One observed (diameter, speed) pair fixing the draw constant.
    pub draw_calibration: DrawCalibration,
    pub draw_speed: Q<Speed>,
    pub film_thickness: Q<Length>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_diameter: Option<Q<Length>>,
    pub length: Q<Length>,
    #[serde(default = "one")]
    pub axes_ratio: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawCalibration {
    pub diameter: Q<Length>,
    pub speed: Q<Speed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FluidSpec {
    Preset(String),
    Custom(CustomFluid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomFluid {
    pub density: Q<Density>,
    pub viscosity: Q<Viscosity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FlowSpec {
    None,
    Uniform { velocity: [Q<Speed>; 3] },
    Poiseuille { origin: [Q<Length>; 3], direction: [f64; 3], radius: Q<Length>, max_speed: Q<Speed> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CargoSpec {
    pub radius: Q<Length>,
    pub mass: Q<Mass>,
    pub position: [Q<Length>; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    /// Tail position.
    pub origin: [Q<Length>; 3],
    /// Tail-to-head direction (normalised on use).
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagnetPreset {
    /// 10×10 mm bench magnet calibrated to 14.95 mT at 19 mm.
    Bench,
    /// 30×30 mm guide magnet, 750 kA/m.
    Guide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<MagnetPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Q<Length>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<Q<Length>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetization: Option<Q<Magnetization>>,
    /// Fit the magnetisation to an on-axis reading instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<FieldReading>,
    pub position: [Q<Length>; 3],
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldReading {
    /// From the near face.
    pub distance: Q<Length>,
    pub field: Q<Flux>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    /// Defaults to the stability limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Q<Time>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Q<Time>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buoyancy: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_contact: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_extra: Option<Q<Frequency>>,
    /// Pin every node to this height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planar: Option<Q<Length>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_nodes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// Magnet held at its initial pose.
    Stationary {},
    Scripted(ScriptedSpec),
    Route(RouteSpec),
    Rotating(RotatingSpec),
    /// Driven by teleop commands or a command log.
    External {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSpec {
    pub waypoints: Vec<WaypointSpec>,
}

/// Magnet slides along the scene route at constant speed, `offset` from the
/// route, starting `lead` ahead of the robot head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub speed: Q<Speed>,
    pub offset: [Q<Length>; 3],
    pub axis: AxisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<Q<Length>>,
    /// Arc length where the magnet stops (route end by default).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Q<Length>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotatingSpec {
    pub omega: Q<Frequency>,
    pub spin_axis: [f64; 3],
    pub initial_axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub t: Q<Time>,
    pub pos: [Q<Length>; 3],
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Fixed([f64; 3]),
    Mode(AxisMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisMode {
    /// Along the route tangent.
    Tangent,
    ReverseTangent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub nodes_csv: bool,
    #[serde(default = "yes")]
    pub metrics_csv: bool,
    #[serde(default)]
    pub trajectory: bool,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Self { nodes_csv: true, metrics_csv: true, trajectory: false }
    }
}

// ---------------------------------------------------------------- resolution

/// A fully built run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub design: RobotDesign,
    pub world: World,
    pub controller: Controller,
    pub duration: f64,
    pub outputs: Outputs,
    /// The input with every default filled in, in SI.
    pub resolved: ScenarioFile,
}

fn schema_err(pointer: &str, message: impl Into<String>) -> Error {
    Error::Schema { pointer: pointer.to_owned(), message: message.into() }
}

fn unit_vec(v: [f64; 3], pointer: &str) -> Result<Vec3> {
    let v = Vec3::from(v);
    if !v.iter().all(|c| c.is_finite()) || v.norm() == 0.0 {
        return Err(schema_err(pointer, "direction must be finite and non-zero"));
    }
    Ok(v)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(parse_file(text)?)
    }

    /// Reads a scenario by path or name (see the module docs).
    pub fn load(name_or_path: &str) -> Result<Self> {
        Self::from_json(&read_scenario_text(name_or_path)?)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.schema != SCHEMA {
            return Err(schema_err("/schema", format!("unsupported schema '{}', expected '{SCHEMA}'", file.schema)));
        }
        let design = resolve_design(&file)?;
        let segment_length = file.segment_length.map_or(DEFAULT_SEGMENT_LENGTH, |q| q.0);
        let policy = file.magnetization.unwrap_or_default();

        let mut scene = build_scene(&file.scene).map_err(|e| at("/scene", e))?;
        if let Some(f) = &file.fluid {
            scene.fluid = match f {
                FluidSpec::Preset(name) => Fluid::preset(name).map_err(|e| at("/fluid", e))?,
                FluidSpec::Custom(c) => Fluid { density: c.density.0, viscosity: c.viscosity.0 },
            };
        }
        if let Some(mu) = file.friction {
            scene.friction_coeff = mu;
        }
        if let Some(k) = file.contact_stiffness {
            scene.contact_stiffness = k.0;
        }
        if let Some(flow) = &file.ambient_flow {
            scene.ambient_flow = match flow {
                FlowSpec::None => AmbientFlow::None,
                FlowSpec::Uniform { velocity } => AmbientFlow::Uniform(vec3(velocity)),
                FlowSpec::Poiseuille { origin, direction, radius, max_speed } => AmbientFlow::Poiseuille {
                    origin: vec3(origin),
                    direction: unit_vec(*direction, "/ambient_flow/direction")?.normalize(),
                    radius: radius.0,
                    max_speed: max_speed.0,
                },
            };
        }
        if let Some(cargo) = &file.cargo {
            scene.cargo = cargo
                .iter()
                .map(|c| CargoBody { radius: c.radius.0, mass: c.mass.0, position: vec3(&c.position), velocity: Vec3::zeros() })
                .collect();
        }
        scene.validate().map_err(|e| at("", e))?;

        let (origin, direction) = match &file.placement {
            Some(p) => (vec3(&p.origin), unit_vec(p.direction, "/placement/direction")?),
            None => (scene.start, scene.start_direction),
        };
        let rod = discretize_with(&design, segment_length, policy).map_err(|e| at("/segment_length", e))?;
        let rod = rod.placed(origin, direction)?;

        let magnet = file.magnet.as_ref().map(resolve_magnet).transpose()?;

        let sim = file.sim.clone().unwrap_or_default();
        let mut config = SimConfig {
            dt: 0.0,
            damping_extra: sim.damping_extra.map_or(0.0, |q| q.0),
            gravity_on: sim.gravity.unwrap_or(false),
            buoyancy: sim.buoyancy.unwrap_or(true),
            self_contact: sim.self_contact.unwrap_or(scene.self_contact),
            record_stride: sim.record_stride.unwrap_or(SimConfig::default().record_stride),
            planar: sim.planar.map(|q| q.0),
            fixed_nodes: sim.fixed_nodes.clone().unwrap_or_default(),
        };
        if config.record_stride == 0 {
            return Err(schema_err("/sim/record_stride", "must be at least 1"));
        }
        let limit = crate::engine::stability_dt(&rod, scene.contact_stiffness);
        config.dt = sim.dt.map_or(limit, |q| q.0);
        let duration = sim.duration.map_or(DEFAULT_DURATION, |q| q.0);
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(schema_err("/sim/duration", "duration must be finite and non-negative"));
        }
        let world = World::new(rod, scene, magnet, config).map_err(|e| at("/sim/dt", e))?;

        let head = world.rod.nodes[world.rod.head_node()].rest_position;
        let controller_spec = resolve_controller(file.controller.clone().unwrap_or(ControllerSpec::Stationary {}), &world, head)?;
        let controller = build_controller(&controller_spec, &world)?;

        let name = file.name.clone().unwrap_or_else(|| file.scene.clone());
        let resolved = ScenarioFile {
            schema: SCHEMA.into(),
            name: Some(name.clone()),
            description: file.description.clone(),
            design: None,
            design_card: Some(design_card(&design)),
            fabrication: None,
            segment_length: Some(Q::new(segment_length)),
            magnetization: Some(policy),
            scene: file.scene.clone(),
            fluid: Some(FluidSpec::Custom(CustomFluid {
                density: Q::new(world.scene.fluid.density),
                viscosity: Q::new(world.scene.fluid.viscosity),
            })),
            friction: Some(world.scene.friction_coeff),
            contact_stiffness: Some(Q::new(world.scene.contact_stiffness)),
            ambient_flow: Some(flow_spec(&world.scene.ambient_flow)),
            cargo: Some(
                world
                    .scene
                    .cargo
                    .iter()
                    .map(|c| CargoSpec { radius: Q::new(c.radius), mass: Q::new(c.mass), position: qvec(&c.position) })
                    .collect(),
            ),
            placement: Some(Placement { origin: qvec(&origin), direction: arr(&direction) }),
            magnet: world.magnet.as_ref().map(|m| MagnetSpec {
                preset: None,
                radius: Some(Q::new(m.radius)),
                height: Some(Q::new(m.height)),
                magnetization: Some(Q::new(m.magnetization)),
                calibration: None,
                position: qvec(&m.position),
                axis: arr(&m.axis),
            }),
            sim: Some(SimSpec {
                dt: Some(Q::new(world.config.dt)),
                duration: Some(Q::new(duration)),
                record_stride: Some(world.config.record_stride),
                gravity: Some(world.config.gravity_on),
                buoyancy: Some(world.config.buoyancy),
                self_contact: Some(world.config.self_contact),
                damping_extra: Some(Q::new(world.config.damping_extra)),
                planar: world.config.planar.map(Q::new),
                fixed_nodes: Some(world.config.fixed_nodes.clone()),
            }),
            controller: Some(controller_spec),
            outputs: Some(file.outputs.clone().unwrap_or_default()),
        };
        Ok(Scenario { name, design, world, controller, duration, outputs: file.outputs.unwrap_or_default(), resolved })
    }

    /// Runs the scenario, checking wall penetration at every step.
    pub fn run_report(&self) -> Result<RunReport> {
        let mut sim = Simulation::new(self.world.clone(), self.controller.clone());
        let steps = steps_for(self.duration, self.world.config.dt);
        let stride = self.world.config.record_stride;
        let mut trajectory = Trajectory::default();
        sim.record(&mut trajectory);
        let route = self.world.scene.route.as_ref();
        let head = self.world.rod.head_node();
        let mut report = RunReport::default();
        let track = |sim: &Simulation, report: &mut RunReport| {
            let pos = &sim.state.rod.positions;
            for (node, p) in self.world.rod.nodes.iter().zip(pos) {
                let pen = (node.contact_radius - self.world.scene.distance(p)) / node.contact_radius;
                report.max_penetration = report.max_penetration.max(pen);
            }
            if let Some(r) = route {
                report.head_progress = report.head_progress.max(r.closest(&pos[head]).1);
            }
        };
        track(&sim, &mut report);
        for k in 1..=steps {
            sim.step()?;
            track(&sim, &mut report);
            if k % stride == 0 || k == steps {
                sim.record(&mut trajectory);
            }
        }
        if let Some(r) = route {
            report.checkpoints_passed = r.checkpoints.iter().filter(|c| report.head_progress > **c).count();
        }
        if let Some(target) = &self.world.scene.target {
            report.target_fraction = Some(target_fraction(&sim.state.rod.positions, target));
        }
        report.hash = trajectory.hash();
        report.trajectory = trajectory;
        Ok(report)
    }

    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(&self.resolved).expect("resolved scenario serialises")
    }
}

/// Outcome of [`Scenario::run_report`].
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub trajectory: Trajectory,
    pub hash: String,
    /// Largest wall overlap over all steps and nodes, as a fraction of the
    /// node's contact radius (negative when nothing ever touched).
    pub max_penetration: f64,
    /// Furthest route arc length reached by the head.
    pub head_progress: f64,
    pub checkpoints_passed: usize,
    /// Arc-length fraction of the final rod inside the scene target.
    pub target_fraction: Option<f64>,
}

/// Fraction of polyline arc length inside `target`, by segment midpoints.
pub fn target_fraction(positions: &[Vec3], target: &TargetRegion) -> f64 {
    let (mut inside, mut total) = (0.0, 0.0);
    for w in positions.windows(2) {
        let len = (w[1] - w[0]).norm();
        total += len;
        if target.contains(&(0.5 * (w[0] + w[1]))) {
            inside += len;
        }
    }
    if total > 0.0 { inside / total } else { 0.0 }
}

/// Parses the document structure only, reporting the JSON pointer of the
/// first violation.
pub fn parse_file(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let err = match serde_path_to_error::deserialize(de) {
        Ok(file) => return Ok(file),
        Err(e) => e,
    };
    let pointer = json_pointer(err.path());
    if pointer == "/controller" {
        // Tagged enums buffer their content and lose the path; re-parse the
        // selected variant on its own to point inside it.
        if let Some(deeper) = controller_error(text) {
            return Err(deeper);
        }
    }
    Err(Error::Schema { pointer, message: err.inner().to_string() })
}

fn controller_error(text: &str) -> Option<Error> {
    fn inner<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Option<Error> {
        serde_path_to_error::deserialize::<_, T>(v).err().map(|e| Error::Schema {
            pointer: format!("/controller{}", json_pointer(e.path())),
            message: e.inner().to_string(),
        })
    }
    let mut root: serde_json::Value = serde_json::from_str(text).ok()?;
    let ctl = root.get_mut("controller")?.as_object_mut()?;
    let kind = ctl.remove("kind")?;
    let rest = serde_json::Value::Object(ctl.clone());
    match kind.as_str()? {
        "scripted" => inner::<ScriptedSpec>(rest),
        "route" => inner::<RouteSpec>(rest),
        "rotating" => inner::<RotatingSpec>(rest),
        _ => None,
    }
}

fn at(pointer: &str, err: Error) -> Error {
    match err {
        Error::Schema { .. } | Error::UnknownName { .. } | Error::TimeStepTooLarge { .. } => err,
        other => schema_err(pointer, other.to_string()),
    }
}

fn resolve_design(file: &ScenarioFile) -> Result<RobotDesign> {
    let given = [file.design.is_some(), file.design_card.is_some(), file.fabrication.is_some()];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(schema_err("", "exactly one of 'design', 'design_card' or 'fabrication' is required"));
    }
    if let Some(name) = &file.design {
        return builtin_design(name);
    }
    if let Some(card) = &file.design_card {
        let m = card.materials.as_ref();
        let materials = m.map_or_else(MaterialSet::default, |m| MaterialSet {
            e_fiber: m.e_fiber.0,
            e_composite: m.e_composite.0,
            remanence: m.remanence.0,
            density_fiber: m.density_fiber.0,
            density_composite: m.density_composite.0,
        });
        let bead_geometry = match &card.beads {
            Some(b) => {
                let mut g = BeadGeometry::with_volume(card.fiber_diameter.0, b.volume.0, b.axes_ratio)
                    .map_err(|e| at("/design_card/beads", e))?;
                g.spacing = b.spacing.0;
                if let Some([lo, hi]) = b.spacing_interval {
                    g.spacing_interval = (lo.0, hi.0);
                }
                Some(g)
            }
            None => None,
        };
        let design = RobotDesign {
            id: card.id.clone(),
            variant: card.variant,
            fiber_diameter: card.fiber_diameter.0,
            length: card.length.0,
            bead_geometry,
            layer_thickness: card.layer_thickness.map(|q| q.0),
            head_diameter: card.head_diameter.map(|q| q.0),
            materials,
            warnings: Vec::new(),
        };
        design.validate().map_err(|e| at("/design_card", e))?;
        return Ok(design);
    }
    let f = file.fabrication.as_ref().expect("checked above");
    let draw = ThermalDrawModel::calibrate(f.draw_calibration.diameter.0, f.draw_calibration.speed.0)
        .map_err(|e| at("/fabrication/draw_calibration", e))?;
    let inputs = FabricationInputs {
        draw,
        draw_speed: f.draw_speed.0,
        film_thickness: f.film_thickness.0,
        head_diameter: f.head_diameter.map(|q| q.0),
        length: f.length.0,
        axes_ratio: f.axes_ratio,
    };
    design_from_fabrication(&f.id, f.variant, &inputs).map_err(|e| at("/fabrication", e))
}

fn design_card(d: &RobotDesign) -> DesignCard {
    let m = &d.materials;
    DesignCard {
        id: d.id.clone(),
        variant: d.variant,
        fiber_diameter: Q::new(d.fiber_diameter),
        length: Q::new(d.length),
        beads: d.bead_geometry.map(|b| BeadSpec {
            spacing: Q::new(b.spacing),
            spacing_interval: Some([Q::new(b.spacing_interval.0), Q::new(b.spacing_interval.1)]),
            volume: Q::new(b.bead_volume),
            axes_ratio: b.axes_ratio,
        }),
        layer_thickness: d.layer_thickness.map(Q::new),
        head_diameter: d.head_diameter.map(Q::new),
        materials: Some(MaterialSpec {
            e_fiber: Q::new(m.e_fiber),
            e_composite: Q::new(m.e_composite),
            remanence: Q::new(m.remanence),
            density_fiber: Q::new(m.density_fiber),
            density_composite: Q::new(m.density_composite),
        }),
    }
}

fn flow_spec(flow: &AmbientFlow) -> FlowSpec {
    match *flow {
        AmbientFlow::None => FlowSpec::None,
        AmbientFlow::Uniform(u) => FlowSpec::Uniform { velocity: qvec(&u) },
        AmbientFlow::Poiseuille { origin, direction, radius, max_speed } => FlowSpec::Poiseuille {
            origin: qvec(&origin),
            direction: arr(&direction),
            radius: Q::new(radius),
            max_speed: Q::new(max_speed),
        },
    }
}

fn resolve_magnet(spec: &MagnetSpec) -> Result<MagnetSource> {
    let (mut radius, mut height, mut magnetization) = match spec.preset {
        Some(MagnetPreset::Bench) => (Some(SMALL_MAGNET_RADIUS), Some(SMALL_MAGNET_HEIGHT), Some(small_magnet_magnetization())),
        Some(MagnetPreset::Guide) => {
            let g = MagnetSource::guiding(Vec3::zeros(), Vec3::z());
            (Some(g.radius), Some(g.height), Some(g.magnetization))
        }
        None => (None, None, None),
    };
    radius = spec.radius.map(|q| q.0).or(radius);
    height = spec.height.map(|q| q.0).or(height);
    let radius = radius.ok_or_else(|| schema_err("/magnet/radius", "required without a preset"))?;
    let height = height.ok_or_else(|| schema_err("/magnet/height", "required without a preset"))?;
    if spec.magnetization.is_some() && spec.calibration.is_some() {
        return Err(schema_err("/magnet", "give either 'magnetization' or 'calibration', not both"));
    }
    if let Some(m) = spec.magnetization {
        magnetization = Some(m.0);
    }
    if let Some(c) = &spec.calibration {
        let cal = calibrate_magnet_magnetization(radius, height, c.distance.0, c.field.0)
            .map_err(|e| at("/magnet/calibration", e))?;
        magnetization = Some(cal.magnetization);
    }
    let magnetization =
        magnetization.ok_or_else(|| schema_err("/magnet/magnetization", "required without a preset or calibration"))?;
    let axis = unit_vec(spec.axis, "/magnet/axis")?;
    MagnetSource::new(radius, height, magnetization, vec3(&spec.position), axis).map_err(|e| at("/magnet", e))
}

/// Route controllers become explicit waypoints; everything else passes through.
fn resolve_controller(spec: ControllerSpec, world: &World, head: Vec3) -> Result<ControllerSpec> {
    let ControllerSpec::Route(RouteSpec { speed, offset, axis, lead, end }) = spec else {
        return Ok(spec);
    };
    let route = world.scene.route.as_ref().ok_or_else(|| {
        schema_err("/controller/kind", format!("scene '{}' has no route to follow", world.scene.name))
    })?;
    if !(speed.0 > 0.0) {
        return Err(schema_err("/controller/speed", "speed must be positive"));
    }
    let s0 = (route.closest(&head).1 + lead.map_or(0.0, |q| q.0)).clamp(0.0, route.length());
    let s1 = end.map_or(route.length(), |q| q.0).clamp(s0, route.length());
    let n = (((s1 - s0) / ROUTE_WAYPOINT_STEP).ceil() as usize).max(1);
    let offset = vec3(&offset);
    let mut waypoints = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = s0 + (s1 - s0) * k as f64 / n as f64;
        let tangent = route_tangent(route, s);
        let a = match axis {
            AxisSpec::Fixed(v) => unit_vec(v, "/controller/axis")?,
            AxisSpec::Mode(AxisMode::Tangent) => tangent,
            AxisSpec::Mode(AxisMode::ReverseTangent) => -tangent,
        };
        waypoints.push(WaypointSpec { t: Q::new((s - s0) / speed.0), pos: qvec(&(route.point_at(s) + offset)), axis: arr(&a) });
    }
    Ok(ControllerSpec::Scripted(ScriptedSpec { waypoints }))
}

fn route_tangent(route: &crate::environment::Route, s: f64) -> Vec3 {
    let h = 1e-6;
    let (a, b) = ((s - h).max(0.0), (s + h).min(route.length()));
    (route.point_at(b) - route.point_at(a)).try_normalize(0.0).unwrap_or(Vec3::x())
}

fn build_controller(spec: &ControllerSpec, world: &World) -> Result<Controller> {
    let initial = world.magnet_pose();
    Ok(match spec {
        ControllerSpec::Stationary {} => Controller::ScriptedPath(ScriptedPath::stationary(initial)),
        ControllerSpec::Scripted(ScriptedSpec { waypoints }) => {
            let mut pts = Vec::with_capacity(waypoints.len());
            for (k, w) in waypoints.iter().enumerate() {
                let pose = MagnetPose::new(vec3(&w.pos), Vec3::from(w.axis))
                    .map_err(|e| at(&format!("/controller/waypoints/{k}"), e))?;
                pts.push(Waypoint { t: w.t.0, pose });
            }
            Controller::ScriptedPath(ScriptedPath::new(pts).map_err(|e| at("/controller/waypoints", e))?)
        }
        ControllerSpec::Rotating(RotatingSpec { omega, spin_axis, initial_axis }) => Controller::RotatingField(RotatingField {
            position: initial.position,
            initial_axis: unit_vec(*initial_axis, "/controller/initial_axis")?,
            spin_axis: unit_vec(*spin_axis, "/controller/spin_axis")?,
            omega: omega.0,
        }),
        ControllerSpec::External {} => Controller::External(ExternalController::new(initial)),
        ControllerSpec::Route(_) => unreachable!("route controllers are resolved to waypoints"),
    })
}

// ---------------------------------------------------------------- lookup

/// Directories listed in `MAGWORM_SCENE_PATH`.
pub fn scene_path_dirs() -> Vec<PathBuf> {
    std::env::var_os(SCENE_PATH_VAR).map(|v| std::env::split_paths(&v).collect()).unwrap_or_default()
}

/// Built-in names plus every `*.json` found on the scene path, sorted.
pub fn scenario_names() -> Vec<String> {
    let mut names: Vec<String> = BUILTIN_SCENARIOS.iter().map(|(n, _)| n.to_string()).collect();
    for dir in scene_path_dirs() {
        if let Ok(entries) = std::fs::read_dir(dir) {
            for e in entries.flatten() {
                let p = e.path();
                if p.extension().is_some_and(|x| x == "json") {
                    if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                        names.push(stem.to_owned());
                    }
                }
            }
        }
    }
    names.sort();
    names.dedup();
    names
}

pub fn read_scenario_text(name_or_path: &str) -> Result<String> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        return Ok(std::fs::read_to_string(path)?);
    }
    let stem = name_or_path.strip_suffix(".json").unwrap_or(name_or_path);
    for dir in scene_path_dirs() {
        let candidate = dir.join(format!("{stem}.json"));
        if candidate.is_file() {
            return Ok(std::fs::read_to_string(candidate)?);
        }
    }
    if let Some((_, text)) = BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == stem) {
        return Ok((*text).to_owned());
    }
    Err(Error::UnknownName { kind: "scenario", name: name_or_path.to_owned(), suggestions: suggest(stem, &scenario_names()) })
}

/// Names from `candidates` close to `name`, best first.
pub fn suggest(name: &str, candidates: &[String]) -> Vec<String> {
    let mut scored: Vec<(f64, &String)> = candidates
        .iter()
        .map(|c| (strsim::normalized_damerau_levenshtein(name, c), c))
        .filter(|(s, _)| *s >= 0.5)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(3).map(|(_, c)| c.clone()).collect()
}

/// RFC 6901 pointer for a serde path.
pub fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(extra: &str) -> String {
        format!(r#"{{"schema": "1", "design": "boas-big-head-paper", "scene": "tank"{extra}}}"#)
    }

    #[test]
    fn minimal_file_resolves_defaults() {
        let s = Scenario::from_json(&minimal("")).unwrap();
        assert_eq!(s.world.scene.name, "tank");
        assert_eq!(s.duration, DEFAULT_DURATION);
        assert!(s.world.magnet.is_none());
        assert_eq!(s.world.config.dt, s.world.stability_dt());
    }

    #[test]
    fn bare_number_is_rejected_with_pointer() {
        let err = Scenario::from_json(&minimal(r#", "segment_length": 0.5"#)).unwrap_err();
        match err {
            Error::Schema { pointer, message } => {
                assert_eq!(pointer, "/segment_length");
                assert!(message.contains("unit suffix"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = Scenario::from_json(&minimal(r#", "sim": {"dt": "1 us", "speed": "2 mm/s"}"#)).unwrap_err();
        let Error::Schema { pointer, message } = err else { panic!() };
        assert_eq!(pointer, "/sim/speed");
        assert!(message.contains("unknown field"), "{message}");
    }

    #[test]
    fn deep_pointer_into_waypoints() {
        let ctl = r#", "magnet": {"preset": "bench", "position": ["0 m", "0 m", "20 mm"], "axis": [0, 0, 1]},
            "controller": {"kind": "scripted", "waypoints": [{"t": "0 s", "pos": ["0 m", "0 m", "1 cm"], "axis": [0, 0, 1]},
                                                              {"t": "1 s", "pos": ["0 m", "0 m", "1 parsec"], "axis": [0, 0, 1]}]}"#;
        let Error::Schema { pointer, .. } = Scenario::from_json(&minimal(ctl)).unwrap_err() else { panic!() };
        assert_eq!(pointer, "/controller/waypoints/1/pos/2");
    }

    #[test]
    fn unknown_key_inside_controller() {
        let ctl = r#", "controller": {"kind": "stationary", "speed": "1 mm/s"}"#;
        assert!(Scenario::from_json(&minimal(ctl)).is_err());
        let ctl = r#", "controller": {"kind": "rotating", "omega": "1 rad/s", "spin_axis": [0, 0, 1], "initial_axis": [1, 0, 0], "phase": 0}"#;
        let Error::Schema { pointer, .. } = Scenario::from_json(&minimal(ctl)).unwrap_err() else { panic!() };
        assert_eq!(pointer, "/controller/phase");
    }

    #[test]
    fn unknown_scene_suggests() {
        let text = r#"{"schema": "1", "design": "boas-big-head-paper", "scene": "serpentin"}"#;
        match Scenario::from_json(text).unwrap_err() {
            Error::UnknownName { suggestions, .. } => assert_eq!(suggestions[0], "serpentine"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oversized_dt_names_both_values() {
        let err = Scenario::from_json(&minimal(r#", "sim": {"dt": "1e-2 s"}"#)).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::TimeStepTooLarge { .. }));
        assert!(msg.contains("1e-2") && msg.contains("stability limit"), "{msg}");
    }

    #[test]
    fn design_sources_are_exclusive() {
        let text = r#"{"schema": "1", "scene": "tank"}"#;
        assert!(matches!(Scenario::from_json(text), Err(Error::Schema { .. })));
    }

    #[test]
    fn wrong_schema_version() {
        let text = r#"{"schema": "2", "design": "boas-paper", "scene": "tank"}"#;
        let Error::Schema { pointer, .. } = Scenario::from_json(text).unwrap_err() else { panic!() };
        assert_eq!(pointer, "/schema");
    }

    #[test]
    fn builtins_parse_and_round_trip() {
        for (name, _) in BUILTIN_SCENARIOS {
            let s = Scenario::load(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = Scenario::from_json(&s.resolved_json()).unwrap();
            assert_eq!(again.world, s.world, "{name}");
            assert_eq!(again.controller, s.controller, "{name}");
            assert_eq!(again.resolved, s.resolved, "{name}");
        }
    }

    #[test]
    fn fabrication_recipe_builds_a_design() {
        let text = r#"{"schema": "1", "scene": "tank", "fabrication": {
            "id": "drawn", "variant": "boas-big-head",
            "draw_calibration": {"diameter": "622.56 um", "speed": "6 mm/s"},
            "draw_speed": "24 mm/s", "film_thickness": "200 um", "head_diameter": "400 um", "length": "40 mm"}}"#;
        let s = Scenario::from_json(text).unwrap();
        assert!((s.design.fiber_diameter - 311.28e-6).abs() < 1e-9);
        assert!(s.design.bead_geometry.is_some());
    }
}
