use std::process::Command;

use finsler_core::scenario::chart_text;
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_finsler-lab")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn transnormal_report_has_fixed_top_level_keys() {
    let (code, stdout, _) = run(&["check-transnormal", "--example", "disc-radial"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["data", "defects", "manifest", "scenario", "verb", "verdict"]);
    assert!(v["defects"]["disc-radial.closed_form_b_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn out_dir_lists_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _, _) = run(&["dump-geodesic", "--example", "euclidean-circles", "--out", out, "--format", "both"]);
    assert_eq!(code, 0);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run-manifest.json")).unwrap()).unwrap();
    let listed: Vec<String> =
        manifest["manifest"]["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert_eq!(listed, ["dump-geodesic.json", "trajectory.csv", "run-manifest.json"]);
    for name in &listed {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 10);
}

#[test]
fn distance_example_reports_log_ratio() {
    let (code, stdout, _) = run(&["verify-distance", "--example", "disc-radial", "--from", "0.04", "--to", "0.25"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let d = v["data"]["geodesic_distance"].as_f64().unwrap();
    assert!((d - 1.25f64.ln()).abs() < 1e-4);
}

#[test]
fn scenario_file_runs_like_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("circles.scn");
    std::fs::write(&path, chart_text("euclidean-circles").unwrap()).unwrap();
    let (code, stdout, _) = run(&["check-transnormal", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
}

#[test]
fn config_errors_exit_2() {
    let (code, _, err) = run(&["check-transnormal", "--example", "no-such-example"]);
    assert_eq!(code, 2);
    assert!(err.contains("no-such-example"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.scn");
    let text = chart_text("disc-radial").unwrap().replace("f = x^2 + y^2", "f = x^2 +");
    std::fs::write(&path, text).unwrap();
    let (code, _, err) = run(&["check-transnormal", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line"), "{err}");

    let (code, _, _) = run(&["check-transnormal"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["not-a-verb", "--example", "disc-radial"]);
    assert_eq!(code, 2);
}

#[test]
fn missing_critical_point_exits_1() {
    let (code, stdout, _) = run(&["check-morse-bott", "--example", "euclidean-linear"]);
    assert_eq!(code, 1);
    assert!(stdout.contains("no critical point"));
}

#[test]
fn list_examples_names_the_registry() {
    let (code, stdout, _) = run(&["list-examples"]);
    assert_eq!(code, 0);
    for name in finsler_core::scenario::EXAMPLE_NAMES {
        assert!(stdout.contains(name));
    }
}
