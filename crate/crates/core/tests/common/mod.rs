//! Checks shared by the property suites and the acceptance runner. Each
//! returns the measured quantity so callers can apply their own bound.
#![allow(dead_code)]

use magworm::engine::{run, ScriptedPath, Simulation};
use magworm::environment::tank;
use magworm::robot::DiscreteRod;
use magworm::rod::{add_bending_forces, add_stretching_forces, bending_energy};
use magworm::scenario::{Scenario, BUILTIN_SCENARIOS};
use magworm::{Controller, MagnetPose, SimConfig, Vec3, World};

pub fn fibre(n: usize) -> DiscreteRod {
    DiscreteRod::uniform(15e-3, 100e-6, 22e6, 1000.0, n).unwrap()
}

/// Rest shape of `rod` displaced by `offsets` (cycled), scaled to `amp` metres.
pub fn perturbed(rod: &DiscreteRod, offsets: &[f64], amp: f64) -> Vec<Vec3> {
    rod.rest_positions()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let o = |k: usize| offsets[(3 * i + k) % offsets.len()];
            p + Vec3::new(o(0), o(1), o(2)) * amp
        })
        .collect()
}

/// Chain with the rod's segment lengths whose joints turn by `angles`
/// (cycled, pairs of in-plane and out-of-plane turns) scaled by `amp` radians.
pub fn bent(rod: &DiscreteRod, angles: &[f64], amp: f64) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros()];
    let (mut yaw, mut pitch) = (0.0f64, 0.0f64);
    for (i, seg) in rod.segments.iter().enumerate() {
        yaw += amp * angles[(2 * i) % angles.len()];
        pitch += amp * angles[(2 * i + 1) % angles.len()];
        let dir = Vec3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), pitch.sin());
        out.push(out[i] + dir * seg.rest_length);
    }
    out
}

/// Energy history of an unactuated, unforced rod released from `positions`:
/// the largest excess over the starting energy and the final energy, both
/// relative to the starting energy.
pub fn energy_history(positions: Vec<Vec3>, steps: usize) -> (f64, f64) {
    let rod = fibre(positions.len() - 1);
    let world = World::with_stable_dt(rod, tank(), None, SimConfig::default()).unwrap();
    let pose = MagnetPose { position: Vec3::zeros(), axis: Vec3::z() };
    let mut sim = Simulation::new(world, Controller::ScriptedPath(ScriptedPath::stationary(pose)));
    sim.state.rod.positions = positions;
    let e0 = sim.world.mechanical_energy(&sim.state).unwrap();
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..steps {
        sim.step().unwrap();
        excess = excess.max(sim.world.mechanical_energy(&sim.state).unwrap() / e0 - 1.0);
    }
    (excess, sim.world.mechanical_energy(&sim.state).unwrap() / e0)
}

/// Net internal force and torque about an off-body pivot, each relative to
/// the force scale (and lever arm) times the node count.
pub fn momentum_residuals(positions: &[Vec3]) -> (f64, f64) {
    let rod = fibre(positions.len() - 1);
    let mut f = vec![Vec3::zeros(); positions.len()];
    add_stretching_forces(&rod, positions, &mut f).unwrap();
    add_bending_forces(&rod, positions, &mut f).unwrap();
    let n = positions.len() as f64;
    let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max) * n;
    let net: Vec3 = f.iter().sum();
    let pivot = Vec3::new(0.01, -0.02, 0.005);
    let torque: Vec3 = positions.iter().zip(&f).map(|(p, fi)| (p - pivot).cross(fi)).sum();
    let lever = positions.iter().map(|p| (p - pivot).norm()).fold(0.0, f64::max);
    (net.norm() / scale, torque.norm() / (scale * lever))
}

/// Largest difference between the bending force and the negated central
/// difference of the bending energy, relative to the largest force.
pub fn bending_gradient_error(positions: &[Vec3]) -> f64 {
    let rod = fibre(positions.len() - 1);
    let mut f = vec![Vec3::zeros(); positions.len()];
    add_bending_forces(&rod, positions, &mut f).unwrap();
    let h = 1e-9;
    let mut p = positions.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let orig = p[i][k];
            p[i][k] = orig + h;
            let ep = bending_energy(&rod, &p).unwrap();
            p[i][k] = orig - h;
            let em = bending_energy(&rod, &p).unwrap();
            p[i][k] = orig;
            g[k] = (ep - em) / (2.0 * h);
        }
        worst = worst.max((f[i] + g).norm());
    }
    let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    worst / scale
}

/// Hash of the first `duration` seconds of a built-in scenario.
pub fn short_hash(name: &str, duration: f64) -> String {
    let s = Scenario::load(name).unwrap();
    run(&s.world, &s.controller, duration).unwrap().hash()
}

/// Resolved dump of every built-in, re-parsed and dumped again; returns the
/// names whose second dump differs.
pub fn round_trip_mismatches() -> Vec<String> {
    BUILTIN_SCENARIOS
        .iter()
        .filter_map(|(name, _)| {
            let first = Scenario::load(name).unwrap().resolved_json();
            let second = Scenario::from_json(&first).unwrap().resolved_json();
            (first != second).then(|| name.to_string())
        })
        .collect()
}
