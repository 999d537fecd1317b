use std::path::Path;
use std::process::{Command, Output};

fn magworm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magworm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fab_predicts_the_drawn_diameter() {
    let o = magworm(&["fab", "--draw-calib", "622.56um@6mm_s", "--v", "24mm_s"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("D = 311.28 um"), "{text}");
    assert!(text.contains("h_t = "));
    assert!(text.contains("lambda = "));
}

#[test]
fn fab_reports_beads_for_a_thick_film() {
    let o = magworm(&["fab", "--draw-calib", "622.56um@6mm_s", "--v", "24mm_s", "--h", "200um"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("film = beads"), "{text}");
    assert!(text.contains("bead volume = "));
}

#[test]
fn listings() {
    let scenes = stdout(&magworm(&["--list-scenes"]));
    for s in ["serpentine", "aneurysm", "three-holes", "tank"] {
        assert!(scenes.lines().any(|l| l == s), "{s} missing from {scenes}");
    }
    let scenarios = stdout(&magworm(&["--list-scenarios"]));
    for s in ["serpentine-navigation", "aneurysm-embolization", "cargo-transport", "three-holes", "tank-speed"] {
        assert!(scenarios.lines().any(|l| l == s), "{s} missing from {scenarios}");
    }
    let designs = stdout(&magworm(&["--list-designs"]));
    assert!(designs.lines().any(|l| l == "boas-big-head-paper"), "{designs}");
}

#[test]
fn help_goes_to_stdout() {
    let o = magworm(&["--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("Usage"));
}

#[test]
fn run_hash_is_deterministic() {
    let a = magworm(&["run", "tank-speed", "--duration", "1ms", "--hash"]);
    let b = magworm(&["run", "tank-speed", "--duration", "1ms", "--hash"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let ha = stdout(&a);
    assert_eq!(ha, stdout(&b));
    let ha = ha.trim();
    assert_eq!(ha.len(), 64);
    assert!(ha.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = magworm(&["run", "tank-speed", "--duration", "1ms", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("hash = "));
    for f in ["resolved.json", "nodes.csv", "metrics.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    // the resolved scenario runs to the same hash
    let resolved = out.join("resolved.json");
    let a = magworm(&["run", "tank-speed", "--duration", "1ms", "--hash"]);
    let b = magworm(&["run", resolved.to_str().unwrap(), "--duration", "1ms", "--hash"]);
    assert_eq!(stdout(&a), stdout(&b), "{}", stderr(&b));
}

fn assert_one_line_err(o: &Output, code: i32) {
    assert_eq!(o.status.code(), Some(code));
    let err = stderr(o);
    assert!(err.starts_with("ERR: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn unknown_scenario_is_one_error_line() {
    let o = magworm(&["run", "serpentine-navigaton"]);
    assert_one_line_err(&o, 1);
    assert!(stderr(&o).contains("serpentine-navigation"), "suggestion expected: {}", stderr(&o));
}

#[test]
fn bad_arguments_exit_2() {
    assert_one_line_err(&magworm(&["fab", "--bogus"]), 2);
}

#[test]
fn schema_error_names_the_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"schema":"1","design":"boas-big-head-paper","scene":"tank","sim":{"dt":1e-7}}"#).unwrap();
    let o = magworm(&["run", path.to_str().unwrap()]);
    assert_one_line_err(&o, 1);
    assert!(stderr(&o).contains("/sim/dt"), "{}", stderr(&o));
}

fn write_log(path: &Path, dt: f64) {
    let log = format!(
        r#"{{"schema":"1","scenario":"three-holes","dt":{dt:e},"steps":300,
            "commands":[{{"step":0,"pos":[-0.02,0.0,0.03],"axis":[1.0,0.0,0.0]}},
                        {{"step":150,"pos":[-0.019,0.0,0.03],"axis":[1.0,0.0,0.0]}}]}}"#
    );
    std::fs::write(path, log).unwrap();
}

fn scenario_dt(name: &str) -> f64 {
    let s = magworm::scenario::Scenario::load(name).unwrap();
    s.world.config.dt
}

#[test]
fn replay_is_deterministic_and_checks_dt() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.json");
    write_log(&log, scenario_dt("three-holes"));
    let a = magworm(&["run", "three-holes", "--replay", log.to_str().unwrap(), "--hash"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = magworm(&["run", "three-holes", "--replay", log.to_str().unwrap(), "--hash"]);
    assert_eq!(stdout(&a), stdout(&b));

    write_log(&log, 2e-6);
    let o = magworm(&["run", "three-holes", "--replay", log.to_str().unwrap()]);
    assert_one_line_err(&o, 1);
    assert!(stderr(&o).contains("dt"), "{}", stderr(&o));
}

#[test]
fn resolved_flag_prints_explicit_scenario() {
    let o = magworm(&["run", "tank-speed", "--resolved"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.get("design_card").is_some());
    assert!(v["sim"].get("dt").is_some());
}
