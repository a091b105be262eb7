use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_micz"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(mode: &str, cfg: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin()
        .arg(mode)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(extra)
        .env("MICZ_LOG", "error")
        .status()
        .unwrap();
    status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn simulate_writes_csv_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("simulate", &config("two_center.json"), tmp.path(), &[]), 0);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x,y,z,vx,vy,vz,E,p_phi,I_e");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    // 17 significant digits
    assert_eq!(row[1], "1.1000000000000001e0");
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!(report["E_rel_drift"].as_f64().unwrap() < 1e-8);
    for q in ["E", "p_phi", "I_e"] {
        assert!(report[q]["max_abs_drift"].is_number() && report[q]["max_rel_drift"].is_number());
    }
}

#[test]
fn kepler_report_meets_energy_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"system": {"family": "flat_multi_center", "e": 1.0,
                      "dyons": [{"position": [0, 0, 0], "g": 0.0, "q": -1.0}]},
            "initial": {"r": [1.0, 0.0, 0.0], "v": [0.0, 1.0, 0.0]}, "t_end": 20.0}"#,
    );
    assert_eq!(run("simulate", &cfg, tmp.path(), &[]), 0);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x,y,z,vx,vy,vz,E,p_phi");
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!(report["E_rel_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn parabolic_csv_has_i_p_column() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("simulate", &config("stark_zeeman.json"), tmp.path(), &[]), 0);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x,y,z,vx,vy,vz,E,p_phi,I_p");
}

#[test]
fn stride_thins_output() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run("simulate", &config("two_center.json"), &a, &["--stride", "1"]), 0);
    assert_eq!(run("simulate", &config("two_center.json"), &b, &["--stride", "50"]), 0);
    let count = |p: &Path| fs::read_to_string(p.join("trajectory.csv")).unwrap().lines().count();
    assert!(count(&a) > 20 * count(&b));
    assert_eq!(run("simulate", &config("two_center.json"), &b, &["--stride", "0"]), 2);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(run("simulate", &config("stark_zeeman.json"), out, &[]), 0);
    }
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
}

#[test]
fn validate_reports_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("validate", &config("two_center_validate.json"), tmp.path(), &[]), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("validation.json")).unwrap()).unwrap();
    assert!(v["max_dt_residual"].as_f64().unwrap() < 1e-4);
    assert!(v["max_dphi_residual"].as_f64().unwrap() < 1e-4);
    assert_eq!(v["turning_points"].as_array().unwrap().len(), 2);
}

#[test]
fn three_dyons_with_two_center_family_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("simulate", &config("three_dyons_bad_family.json"), tmp.path(), &[]), 2);
    assert_eq!(run("validate", &config("three_dyons_bad_family.json"), tmp.path(), &[]), 2);
}

#[test]
fn validate_refuses_non_separable_family() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("validate", &config("curved_pseudosphere.json"), tmp.path(), &[]), 2);
    assert!(!tmp.path().join("validation.json").exists());
}

#[test]
fn malformed_and_mismatched_configs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "{ not json");
    assert_eq!(run("simulate", &cfg, tmp.path(), &[]), 2);
    assert_eq!(run("simulate", &tmp.path().join("missing.json"), tmp.path(), &[]), 2);
    // config declares sweep mode
    assert_eq!(run("simulate", &config("sweep_bz.json"), tmp.path(), &[]), 2);
    let cfg = write_config(
        tmp.path(),
        r#"{"system": {"family": "curved_multi_center", "e": 1.0, "dyons": [],
                      "metric": {"kind": "sphere", "r0": -1.0}}}"#,
    );
    assert_eq!(run("green", &cfg, tmp.path(), &[]), 2);
}

#[test]
fn collision_exits_3_with_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"system": {"family": "flat_multi_center", "e": 1.0,
                      "dyons": [{"position": [0, 0, 0], "g": 0.0, "q": -1.0}]},
            "initial": {"r": [1.0, 0.0, 0.0], "v": [-0.5, 0.0, 0.0]}, "t_end": 20.0,
            "integrator": {"collision_radius": 1e-3}}"#,
    );
    assert_eq!(run("simulate", &cfg, tmp.path(), &[]), 3);
    let csv = fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_ne!(report["termination"], "completed");
}

#[test]
fn sweep_rows_follow_input_order() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("sweep", &config("sweep_bz.json"), tmp.path(), &[]), 0);
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let values: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values, vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.1]);
    let again = tmp.path().join("again");
    assert_eq!(run("sweep", &config("sweep_bz.json"), &again, &[]), 0);
    assert_eq!(csv, fs::read_to_string(again.join("sweep.csv")).unwrap());
}

#[test]
fn green_table_matches_sphere_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("green", &config("green_sphere.json"), tmp.path(), &[]), 0);
    let csv = fs::read_to_string(tmp.path().join("green.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "r,phi");
    for line in csv.lines().skip(1) {
        let (r, phi) = line.split_once(',').unwrap();
        let (r, phi): (f64, f64) = (r.parse().unwrap(), phi.parse().unwrap());
        assert!((phi - (1.0 - r * r) / (2.0 * r)).abs() < 1e-12);
    }
}
