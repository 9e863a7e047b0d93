mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fairchannel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairchannel"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const THREE_CELLS: &str =
    r#"{"labels": ["a", "b", "c"], "p0": [0.6, 0.3, 0.1], "p1": [0.2, 0.5, 0.3], "w1": [0.1, 0.5, 0.9]}"#;

#[test]
fn audit_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::fixture("compas_synthetic.csv");
    let schema = common::compas_schema();
    let out = fairchannel(&[
        "audit",
        "--data",
        path_str(&data),
        "--schema",
        path_str(&schema),
        "--smooth",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["status"], "ok");
    for f in [
        "report.json",
        "fstar_by_cell.csv",
        "densities/Age.csv",
        "densities/PriorCounts.csv",
        "densities/PriorCounts_values.csv",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let density = std::fs::read_to_string(dir.path().join("densities/Sex.csv")).unwrap();
    assert!(density.starts_with("stratum,kind,x,density\n"));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["options"]["smoothing"], 1e-9);
}

#[test]
fn no_disparity_fixture_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::fixture("no_disparity.csv");
    let schema = common::compas_schema();
    let out = fairchannel(&[
        "audit",
        "--data",
        path_str(&data),
        "--schema",
        path_str(&schema),
        "--out",
        path_str(dir.path()),
    ]);
    assert!(out.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["delta_opt"], 0.0);
    assert_eq!(report["degenerate"], true);
    assert!(report["prototypes"].is_null());
}

#[test]
fn continuity_violation_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::fixture("compas_synthetic.csv");
    let schema = common::compas_schema();
    let out = fairchannel(&[
        "audit",
        "--data",
        path_str(&data),
        "--schema",
        path_str(&schema),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stdout_json(&out);
    assert_eq!(err["error"], "AbsoluteContinuityViolation");
    assert!(!err["continuity_violations"].as_array().unwrap().is_empty());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::fixture("compas_synthetic.csv");
    let schema = common::compas_schema();
    let out = fairchannel(&[
        "audit",
        "--data",
        path_str(&data),
        "--schema",
        path_str(&schema),
        "--lambda",
        "1,2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["error"], "Usage");
    let out = fairchannel(&["audit", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let bad_schema = dir.path().join("bad.toml");
    std::fs::write(&bad_schema, "outcome = 3\n").unwrap();
    let out = fairchannel(&[
        "audit",
        "--data",
        path_str(&data),
        "--schema",
        path_str(&bad_schema),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["error"], "Schema");
}

#[test]
fn missing_data_file_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let schema = common::compas_schema();
    let out = fairchannel(&[
        "audit",
        "--data",
        "/nonexistent.csv",
        "--schema",
        path_str(&schema),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["error"], "Io");
}

#[test]
fn malformed_schedule_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("d.json");
    std::fs::write(&dist, THREE_CELLS).unwrap();
    let schedule = dir.path().join("s.csv");
    std::fs::write(&schedule, "# weights\n1,0,0,0\n1,0,zero,0\n").unwrap();
    let out = fairchannel(&[
        "path",
        "--schedule",
        path_str(&schedule),
        "--distributions",
        path_str(&dist),
        "--out",
        path_str(&dir.path().join("p.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stdout_json(&out);
    assert_eq!(err["error"], "Schedule");
    assert!(err["message"].as_str().unwrap().contains(":3:"));
}

#[test]
fn single_row_schedule_has_zero_objective() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("d.json");
    std::fs::write(&dist, THREE_CELLS).unwrap();
    let schedule = dir.path().join("s.csv");
    std::fs::write(&schedule, "1,0,0,0\n").unwrap();
    let csv = dir.path().join("p.csv");
    let out = fairchannel(&[
        "path",
        "--schedule",
        path_str(&schedule),
        "--distributions",
        path_str(&dist),
        "--out",
        path_str(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = read_csv(&csv);
    assert_eq!(rows.len(), 1);
    assert!(rows[0][4].parse::<f64>().unwrap().abs() <= 1e-12);
    assert_eq!(rows[0][10], "true");
}

#[test]
fn output_weight_sweep_tightens_output_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let dist = dir.path().join("d.json");
    std::fs::write(&dist, THREE_CELLS).unwrap();
    let schedule = dir.path().join("s.csv");
    std::fs::write(&schedule, "1,0,0,0\n1,0,0,0.5\n1,0,0,1\n").unwrap();
    let csv = dir.path().join("p.csv");
    let out = fairchannel(&[
        "path",
        "--schedule",
        path_str(&schedule),
        "--distributions",
        path_str(&dist),
        "--out",
        path_str(&csv),
    ]);
    assert!(out.status.success());
    let kl: Vec<f64> = read_csv(&csv).iter().map(|r| r[8].parse().unwrap()).collect();
    assert_eq!(kl.len(), 3);
    assert!(kl.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{kl:?}");
    assert!(kl[2] < kl[0]);
}

#[test]
fn path_from_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let schedule = dir.path().join("s.csv");
    std::fs::write(&schedule, "1,0,0,0\n0.5,0.5,0,0\n0,1,0,0\n").unwrap();
    let csv = dir.path().join("p.csv");
    let data = common::fixture("compas_synthetic.csv");
    let schema = common::compas_schema();
    let out = fairchannel(&[
        "path",
        "--schedule",
        path_str(&schedule),
        "--data",
        path_str(&data),
        "--schema",
        path_str(&schema),
        "--cells",
        "Age,Sex",
        "--out",
        path_str(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = read_csv(&csv);
    assert_eq!(rows.len(), 3);
    // endpoints: p0 then p1
    assert!(rows[0][5].parse::<f64>().unwrap() <= 1e-9);
    assert!(rows[2][6].parse::<f64>().unwrap() <= 1e-9);
}

#[test]
fn selftest_passes() {
    let out = fairchannel(&["selftest"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["passed"], true);
}

#[test]
fn audits_are_byte_identical() {
    let data = common::fixture("compas_synthetic.csv");
    let schema = common::compas_schema();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = fairchannel(&[
            "audit",
            "--data",
            path_str(&data),
            "--schema",
            path_str(&schema),
            "--groups",
            "model",
            "--out",
            path_str(d.path()),
        ]);
        assert!(out.status.success());
    }
    for f in [
        "report.json",
        "fstar_by_cell.csv",
        "densities/Age.csv",
        "densities/LengthOfStay.csv",
        "densities/PriorCounts_values.csv",
    ] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}
