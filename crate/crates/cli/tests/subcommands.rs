use std::process::{Command, Output};

use serde_json::Value;

fn oscgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscgeo")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = oscgeo(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn flat_bourgain_holds() {
    let r = report(&["check-bourgain", "--object", "euclidean", "--point", "0,0,0", "--y0", "0,0", "--epsilon", "0.2"]);
    assert_eq!(r["verdict"], "holds");
    assert_eq!(r["thresholds"]["tau_hold"], 1e-5);
}

#[test]
fn test_phase_has_contact_order_four() {
    let r = report(&["contact-order", "--object", "phase:test4", "--kmax", "6"]);
    assert_eq!(r["diagnostics"]["order"], 4.0);
    assert_eq!(r["verdict"], "holds");
}

#[test]
fn paraboloid_pointwise_decay_slope() {
    let r =
        report(&["osc-decay", "--object", "phase:paraboloid", "--mode", "pointwise", "--Ns", "16,32,64,128,256,512"]);
    let slope = r["residuals"]["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn tolerance_flag_forms() {
    let r = report(&["check-chaotic", "--object", "sphere", "--directions", "8", "--tol", "1e-4"]);
    assert_eq!(r["thresholds"]["min_over_directions"], 1e-4);
    assert_eq!(r["inputs"]["tolerances"]["tau_c"], 1e-4);
    assert_eq!(r["verdict"], "fails");
    let r = report(&["check-bourgain", "--object", "phase:bourgain", "--tol", "tau_hold=1e-6,tau_fail=1e-2"]);
    assert_eq!(r["thresholds"]["tau_fail"], 1e-2);
    // two tolerances cannot share one bare number
    let out = oscgeo(&["check-bourgain", "--object", "phase:bourgain", "--tol", "1e-6"]);
    assert_eq!(out.status.code(), Some(2));
    let out = oscgeo(&["wolff", "--object", "phase:paraboloid", "--tol", "lower=0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn expect_flag_sets_exit_code() {
    let out = oscgeo(&["check-bourgain", "--object", "phase:bourgain", "--expect", "holds"]);
    assert_eq!(out.status.code(), Some(1));
    let out = oscgeo(&["check-bourgain", "--object", "phase:bourgain", "--expect", "fails"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn inline_object_and_negative_coordinates() {
    let r = report(&[
        "curvature",
        "--object",
        r#"{"metric": {"name": "constant_curvature", "dim": 3, "kappa": -1.0}}"#,
        "--point",
        "-0.1,0.2,-0.05",
    ]);
    let s = r["diagnostics"]["scalar"].as_f64().unwrap();
    assert!((s + 6.0).abs() < 1e-9, "{s}");
}

#[test]
fn out_flag_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = oscgeo(&[
        "geodesic",
        "--object",
        "sphere",
        "--direction",
        "0,0,1",
        "--length",
        "0.3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("geodesic.json").exists());
    let path = std::fs::read_to_string(dir.path().join("geodesic.path.csv")).unwrap();
    assert!(path.starts_with("s,x1,x2,x3,v1,v2,v3\n"));
}

#[test]
fn thread_cap() {
    let out = Command::new(env!("CARGO_BIN_EXE_oscgeo"))
        .env("OSCGEO_THREADS", "1")
        .args(["wolff", "--object", "phase:paraboloid"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_oscgeo"))
        .env("OSCGEO_THREADS", "zero")
        .args(["wolff", "--object", "phase:paraboloid"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_object_exits_two() {
    assert_eq!(oscgeo(&["curvature", "--object", "metrc"]).status.code(), Some(2));
    assert_eq!(oscgeo(&["curvature", "--object", "phase:nope"]).status.code(), Some(2));
}
