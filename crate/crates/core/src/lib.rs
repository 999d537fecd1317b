//! Reduced-order simulator and design toolkit for slender, magnetically
//! actuated filament microrobots ("magnetic beads on a string").
//!
//! The crate is organised bottom-up:
//!
//! * [`fabrication`] predicts fibre diameter, film stability and bead layout
//!   from fabrication parameters and produces [`RobotDesign`] cards.
//! * [`robot`] discretises a design into a [`DiscreteRod`].
//! * [`magnetics`] evaluates permanent-magnet fields and bead wrenches.
//! * [`rod`] holds the internal elastic forces and the cantilever oracle.
//! * [`hydro`] provides resistive-force-theory and Stokes drag.
//! * [`environment`] builds signed-distance scenes, contact and cargo.
//! * [`engine`] assembles forces and integrates the dynamics.
//! * [`experiments`] scripts the characterization experiments.
//! * [`scenario`] and [`trajectory`] define the file formats used by the CLI
//!   and the teleoperation server.

pub mod engine;
pub mod environment;
pub mod error;
pub mod experiments;
pub mod fabrication;
pub mod hydro;
pub mod magnetics;
pub mod robot;
pub mod rod;
pub mod scenario;
pub mod trajectory;
pub mod units;

pub use engine::{Controller, MagnetPose, SimConfig, SimState, Trajectory, World};
pub use environment::{CargoBody, Scene};
pub use error::{Error, Result};
pub use fabrication::{MaterialSet, RobotDesign, Variant};
pub use hydro::Fluid;
pub use magnetics::MagnetSource;
pub use robot::DiscreteRod;
pub use rod::RodState;
pub use units::{Mat3, Vec3, MU0};

// The guide under `book/` is compiled as doc-tests so its snippets stay in
// sync with the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fabrication.md")]
    mod fabrication {}
    #[doc = include_str!("../../../book/src/robot-model.md")]
    mod robot_model {}
    #[doc = include_str!("../../../book/src/magnetics.md")]
    mod magnetics {}
    #[doc = include_str!("../../../book/src/rod-mechanics.md")]
    mod rod_mechanics {}
    #[doc = include_str!("../../../book/src/hydrodynamics.md")]
    mod hydrodynamics {}
    #[doc = include_str!("../../../book/src/environment.md")]
    mod environment {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/teleop.md")]
    mod teleop {}
}
