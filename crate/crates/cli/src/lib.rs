//! Command-line front end and teleoperation server.

pub mod app;
pub mod teleop;
