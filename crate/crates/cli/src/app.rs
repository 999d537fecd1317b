//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use magworm::engine::{steps_for, CommandLog, Controller, ExternalController, Simulation};
use magworm::environment::BUILTIN_SCENES;
use magworm::experiments::{
    compare_designs, design_sweep, paper_quartet, run_experiment, ExperimentKind, ExperimentOptions, SweepGrid,
};
use magworm::fabrication::{
    builtin_design, builtin_design_names, critical_film_thickness, film_breakup_decision, predict_bead_geometry,
    FilmOutcome, ThermalDrawModel, SPACING_NOMINAL, SPACING_SPREAD,
};
use magworm::scenario::{scenario_names, Scenario};
use magworm::units::{parse_quantity, Dimension};

use crate::teleop::{self, ServeOptions};

#[derive(Debug, Parser)]
#[command(name = "magworm", version, about = "Magnetic filament microrobot simulator and design toolkit")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
pub struct Cli {
    /// List built-in scenes.
    #[arg(long)]
    pub list_scenes: bool,
    /// List built-in designs.
    #[arg(long)]
    pub list_designs: bool,
    /// List scenarios (built-in and on MAGWORM_SCENE_PATH).
    #[arg(long)]
    pub list_scenarios: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fabrication predictions: fibre diameter, film stability, bead layout.
    Fab(FabArgs),
    /// Headless scenario run.
    Run(RunArgs),
    /// Characterization experiments, design comparison and sweeps.
    Exp(ExpArgs),
    /// Teleoperation server (WebSocket on /ws, static files on /).
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct FabArgs {
    /// Observed diameter and draw speed fixing the draw constant, e.g. 622.56um@6mm_s.
    #[arg(long, conflicts_with = "c")]
    pub draw_calib: Option<String>,
    /// Draw constant C in SI (m·(m/s)^½).
    #[arg(long)]
    pub c: Option<f64>,
    /// Draw speed, e.g. 24mm_s.
    #[arg(long)]
    pub v: String,
    /// Film thickness, e.g. 200um.
    #[arg(long)]
    pub h: Option<String>,
    /// Minor over major axis of the beads.
    #[arg(long, default_value_t = 1.0)]
    pub axes_ratio: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file or name.
    pub scenario: String,
    /// Directory for CSV output and the resolved scenario.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print only the trajectory hash.
    #[arg(long)]
    pub hash: bool,
    /// Drive the magnet from a recorded command log.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Override the simulated duration, e.g. 50ms.
    #[arg(long, conflicts_with = "replay")]
    pub duration: Option<String>,
    /// Print the resolved scenario and exit.
    #[arg(long)]
    pub resolved: bool,
}

#[derive(Debug, Args)]
pub struct ExpArgs {
    /// deflection, curvature, speed, compare or sweep.
    pub kind: String,
    /// Design names (default: boas-big-head-paper; compare uses the four reference designs).
    #[arg(long = "design")]
    pub designs: Vec<String>,
    /// Experiment used by compare and sweep.
    #[arg(long, default_value = "deflection")]
    pub experiment: String,
    /// Output directory for CSV and verdict files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep values of bead spacing, comma separated with units.
    #[arg(long)]
    pub spacing: Option<String>,
    /// Sweep values of head diameter.
    #[arg(long)]
    pub head: Option<String>,
    /// Sweep values of fibre diameter.
    #[arg(long)]
    pub fiber: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Scenario file or name.
    pub scenario: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory served on / (the steering UI bundle).
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Simulated seconds per wall second.
    #[arg(long, default_value_t = 1.0)]
    pub rt_factor: f64,
    /// Where recorded command logs are written.
    #[arg(long, default_value = ".")]
    pub log_dir: PathBuf,
}

/// Collapses a multi-line message for the `ERR:` line.
pub fn one_line(msg: &str) -> String {
    msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("; ")
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    if cli.list_scenes || cli.list_designs || cli.list_scenarios {
        if cli.list_scenes {
            BUILTIN_SCENES.iter().try_for_each(|s| writeln!(out, "{s}"))?;
        }
        if cli.list_designs {
            builtin_design_names().iter().try_for_each(|s| writeln!(out, "{s}"))?;
        }
        if cli.list_scenarios {
            scenario_names().iter().try_for_each(|s| writeln!(out, "{s}"))?;
        }
        return Ok(());
    }
    match cli.command {
        Some(Command::Fab(a)) => fab(&a, out),
        Some(Command::Run(a)) => run_scenario(&a, out),
        Some(Command::Exp(a)) => exp(&a, out),
        Some(Command::Serve(a)) => serve(a, out),
        None => bail!("no command given (try --help)"),
    }
}

fn um(v: f64) -> String {
    format!("{:.2} um", v * 1e6)
}

fn fab(a: &FabArgs, out: &mut dyn Write) -> Result<()> {
    let draw = match (&a.draw_calib, a.c) {
        (Some(cal), _) => {
            let (d, v) = cal.split_once('@').context("--draw-calib expects <diameter>@<speed>, e.g. 622.56um@6mm_s")?;
            ThermalDrawModel::calibrate(parse_quantity(d, Dimension::Length)?, parse_quantity(v, Dimension::Speed)?)?
        }
        (None, Some(c)) => ThermalDrawModel::new(c)?,
        (None, None) => bail!("give either --draw-calib or --c"),
    };
    let v = parse_quantity(&a.v, Dimension::Speed)?;
    let d = draw.predict_diameter(v)?;
    writeln!(out, "C = {:e} m*(m/s)^0.5", draw.draw_constant)?;
    writeln!(out, "D = {}", um(d))?;
    let ht = critical_film_thickness(d)?;
    writeln!(out, "h_t = {}", um(ht))?;
    writeln!(
        out,
        "lambda = {} [{}, {}]",
        um(SPACING_NOMINAL * d),
        um((SPACING_NOMINAL - SPACING_SPREAD) * d),
        um((SPACING_NOMINAL + SPACING_SPREAD) * d)
    )?;
    if let Some(h) = &a.h {
        let h = parse_quantity(h, Dimension::Length)?;
        match film_breakup_decision(d, h)? {
            FilmOutcome::UniformLayer => writeln!(out, "film = uniform layer ({} <= h_t)", um(h))?,
            FilmOutcome::Beads => {
                let b = predict_bead_geometry(d, h, a.axes_ratio)?;
                writeln!(out, "film = beads ({} > h_t)", um(h))?;
                writeln!(out, "bead volume = {:e} m3", b.bead_volume)?;
                writeln!(out, "bead major diameter = {}", um(b.major_diameter()))?;
                writeln!(out, "bead minor diameter = {}", um(b.minor_diameter()))?;
            }
        }
    }
    Ok(())
}

fn run_scenario(a: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut scenario = Scenario::load(&a.scenario)?;
    if a.resolved {
        writeln!(out, "{}", scenario.resolved_json())?;
        return Ok(());
    }
    if let Some(d) = &a.duration {
        scenario.duration = parse_quantity(d, Dimension::Time)?;
    }
    let dt = scenario.world.config.dt;
    let (controller, steps) = match &a.replay {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let log = CommandLog::parse(&text)?;
            if log.dt != dt {
                bail!("command log was recorded with dt = {:e} s but the scenario resolves to dt = {dt:e} s", log.dt);
            }
            let initial = scenario.world.magnet_pose();
            (Controller::External(ExternalController::from_log(initial, &log)?), log.steps)
        }
        None => (scenario.controller.clone(), steps_for(scenario.duration, dt)),
    };
    let mut sim = Simulation::new(scenario.world.clone(), controller);
    let traj = sim.run_steps(steps)?;
    let hash = traj.hash();
    if let Some(dir) = &a.out {
        write_outputs(dir, &scenario, &traj)?;
    }
    if a.hash {
        writeln!(out, "{hash}")?;
    } else {
        writeln!(out, "scenario = {}", scenario.name)?;
        writeln!(out, "steps = {steps}")?;
        writeln!(out, "frames = {}", traj.len())?;
        writeln!(out, "t_end = {:e} s", sim.state.time())?;
        writeln!(out, "hash = {hash}")?;
    }
    Ok(())
}

fn write_outputs(dir: &Path, scenario: &Scenario, traj: &magworm::Trajectory) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("resolved.json"), scenario.resolved_json())?;
    if scenario.outputs.nodes_csv {
        traj.write_nodes_csv(fs::File::create(dir.join("nodes.csv"))?)?;
    }
    if scenario.outputs.metrics_csv {
        traj.write_metrics_csv(fs::File::create(dir.join("metrics.csv"))?)?;
    }
    if scenario.outputs.trajectory {
        fs::write(dir.join("trajectory.bin"), traj.to_binary())?;
    }
    Ok(())
}

fn parse_list(text: &Option<String>) -> Result<Vec<f64>> {
    match text {
        None => Ok(Vec::new()),
        Some(t) => t.split(',').map(|v| Ok(parse_quantity(v, Dimension::Length)?)).collect(),
    }
}

fn designs_or(names: &[String], default: impl FnOnce() -> Vec<magworm::RobotDesign>) -> Result<Vec<magworm::RobotDesign>> {
    if names.is_empty() {
        return Ok(default());
    }
    names.iter().map(|n| Ok(builtin_design(n)?)).collect()
}

fn value_unit(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Deflection => "deflection_m",
        ExperimentKind::Curvature => "kappa_max_1/m",
        ExperimentKind::Speed => "v_max_m/s",
    }
}

fn exp(a: &ExpArgs, out: &mut dyn Write) -> Result<()> {
    let opts = ExperimentOptions::default();
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
    }
    match a.kind.as_str() {
        "compare" => {
            let kind = ExperimentKind::parse(&a.experiment)?;
            let designs = designs_or(&a.designs, paper_quartet)?;
            let rows = compare_designs(&designs, kind, &opts)?;
            let mut text = format!("rank,design,{}\n", value_unit(kind));
            for r in &rows {
                text.push_str(&format!("{},{},{:e}\n", r.rank, r.design, r.value));
            }
            write!(out, "{text}")?;
            if let Some(dir) = &a.out {
                fs::write(dir.join(format!("compare-{}.csv", kind.name())), text)?;
            }
        }
        "sweep" => {
            let kind = ExperimentKind::parse(&a.experiment)?;
            let base = designs_or(&a.designs, || vec![builtin_design("boas-big-head-paper").expect("built-in")])?;
            let [base] = base.as_slice() else { bail!("sweep takes one --design") };
            let grid = SweepGrid { bead_spacing: parse_list(&a.spacing)?, head_diameter: parse_list(&a.head)?, fiber_diameter: parse_list(&a.fiber)? };
            let result = design_sweep(base, &grid, kind, &opts)?;
            let mut csv = Vec::new();
            result.write_csv(&mut csv)?;
            out.write_all(&csv)?;
            match &result.best {
                Some(b) => writeln!(out, "best = {} ({:e})", b.id, b.objective.unwrap_or(f64::NAN))?,
                None => writeln!(out, "best = none")?,
            }
            if let Some(dir) = &a.out {
                fs::write(dir.join(format!("sweep-{}.csv", kind.name())), csv)?;
            }
        }
        name => {
            let kind = ExperimentKind::parse(name)?;
            let designs = designs_or(&a.designs, || vec![builtin_design("boas-big-head-paper").expect("built-in")])?;
            for d in &designs {
                let report = run_experiment(d, kind, &opts)?;
                let mut csv = Vec::new();
                report.write_csv(&mut csv)?;
                writeln!(out, "# {} {}", kind.name(), d.id)?;
                out.write_all(&csv)?;
                for v in &report.verdicts {
                    let tag = if v.pass { "PASS" } else { "FAIL" };
                    writeln!(out, "{tag} {}: measured {:e}, expected {:e}, tolerance {:e}", v.criterion, v.measured, v.expected, v.tolerance)?;
                }
                for n in &report.notes {
                    writeln!(out, "note: {n}")?;
                }
                if let Some(dir) = &a.out {
                    fs::write(dir.join(format!("{}-{}.csv", kind.name(), d.id)), &csv)?;
                    fs::write(dir.join(format!("{}-{}.verdicts.json", kind.name(), d.id)), report.verdicts_json())?;
                }
            }
        }
    }
    Ok(())
}

fn serve(a: ServeArgs, out: &mut dyn Write) -> Result<()> {
    if !(a.rt_factor > 0.0 && a.rt_factor.is_finite()) {
        bail!("--rt-factor must be positive");
    }
    // Fail fast on a bad scenario before binding the port.
    Scenario::load(&a.scenario)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("binding {}:{}", a.host, a.port))?;
        writeln!(out, "listening on http://{}", listener.local_addr()?)?;
        out.flush()?;
        let opts = ServeOptions {
            scenario: a.scenario,
            rt_factor: a.rt_factor,
            static_dir: a.static_dir,
            log_dir: a.log_dir,
            ..ServeOptions::default()
        };
        teleop::serve(listener, opts).await
    })
}
