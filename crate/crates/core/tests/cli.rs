use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn descriptor(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("descriptors").join(name)
}

fn lbundle(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_lbundle"))
        .args(args)
        .env("LB_SEED", "42")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(name: &str) -> String {
    descriptor(name).to_string_lossy().into_owned()
}

#[test]
fn transform_bernoulli_at_zero() {
    let out = lbundle(&["transform", "--input", &path("bernoulli.json"), "--theta", "0"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["eta"][0].as_f64().unwrap(), 0.5);
    assert!(v["residual"].as_f64().unwrap() <= 1e-10);
    let raw = String::from_utf8(out.stdout).unwrap();
    let at = |k: &str| raw.find(&format!("\"{k}\"")).unwrap();
    assert!(at("theta") < at("eta") && at("eta") < at("psi") && at("psi") < at("psi_star") && at("psi_star") < at("residual"));
}

#[test]
fn transform_reads_theta_from_stdin_descriptor() {
    let out = lbundle(&["transform"], Some(r#"{"kind":"builtin","builtin":"categorical","dim":2,"theta":[0.0,0.0]}"#));
    assert_eq!(out.status.code(), Some(0));
    let eta = json(&out)["eta"].clone();
    assert!((eta[0].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn exit_codes() {
    let parse = lbundle(&["transform", "--theta", "0"], Some("{ not json"));
    assert_eq!(parse.status.code(), Some(2));
    assert!(parse.stdout.is_empty());

    let boxed = r#"{"kind":"builtin","builtin":"bernoulli","lower":[-1],"upper":[1]}"#;
    assert_eq!(lbundle(&["transform", "--theta", "2"], Some(boxed)).status.code(), Some(3));

    let boundary = lbundle(&["transform", "--input", &path("bernoulli.json"), "--eta", "1"], None);
    assert_eq!(boundary.status.code(), Some(4));

    let unknown = lbundle(&["transform", "--theta", "0"], Some(r#"{"kind":"builtin","builtin":"cauchy"}"#));
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn fiber_dump() {
    let out = lbundle(&["fiber", "--input", &path("bernoulli.json"), "--theta", "0"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["L"], serde_json::json!([[0.25]]));
    assert_eq!(v["J"], serde_json::json!([[1.0, 0.0], [0.0, -1.0]]));
    assert_eq!(v["omega"], serde_json::json!([[0.0, 1.0], [-1.0, 0.0]]));
}

#[test]
fn metric_csv() {
    let out = lbundle(&["metric", "--input", &path("bernoulli.json"), "--from", "-2", "--to", "2", "--step", "1", "--csv"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,g_00");
    assert_eq!(lines.len(), 6);
    for line in &lines[1..] {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let s = 1.0 / (1.0 + (-cells[0]).exp());
        assert!((cells[1] - s * (1.0 - s)).abs() < 1e-15);
    }
}

#[test]
fn family_coefficients() {
    let out = lbundle(&["family", "--input", &path("quartic_deformation.json"), "--point", "1", "--u-order", "1"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let value: Vec<f64> = serde_json::from_value(v["value"].clone()).unwrap();
    assert_eq!(value.len(), 2);
    assert_eq!(value[0], 0.5);
    assert!((value[1] - 0.0833333).abs() < 1e-7);
    assert_eq!(v["hessian"], serde_json::json!([[[1.0]], [[1.0]]]));
}

#[test]
fn verify_reports() {
    let out = lbundle(&["verify", "--input", &path("bernoulli.json"), "--samples", "5"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["exit_status"], 0);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["status"] == "pass"));

    let fam = lbundle(&["verify", "--input", &path("quartic_deformation.json")], None);
    assert_eq!(fam.status.code(), Some(0));
    let checks = json(&fam)["checks"].clone();
    let u0 = checks.as_array().unwrap().iter().find(|c| c["name"] == "u0_reduction").unwrap();
    assert_eq!(u0["status"], "pass");

    let bad = lbundle(&["verify", "--input", &path("quartic_leading.json")], None);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("formal_convexity: fail"));
    assert_eq!(json(&bad)["exit_status"], 1);
}

#[test]
fn verify_flags_substitutions_outside_formal_validity() {
    let qft = r#"{
        "name": "softening",
        "free_energy": {"name": "s", "order": 1, "coefficients": [
            {"kind": "polynomial", "dim": 1, "poly_terms": [{"coeff": 0.5, "exponents": [2]}]},
            {"kind": "polynomial", "dim": 1, "poly_terms": [{"coeff": -10.0, "exponents": [2]}]}]},
        "validation_grid": [[1.0]]
    }"#;
    let out = lbundle(&["verify"], Some(qft));
    assert_eq!(out.status.code(), Some(0));
    let checks = json(&out)["checks"].clone();
    let c = checks
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "order1.u=0.1.legendre_morphism_positive_definite")
        .unwrap()
        .clone();
    assert_eq!(c["status"], "flagged");
}

#[test]
fn seed_changes_samples_but_runs_are_reproducible() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_lbundle"))
            .args(["verify", "--input", &path("poisson.json"), "--samples", "4"])
            .env("LB_SEED", seed)
            .output()
            .unwrap()
    };
    assert_eq!(run("7").stdout, run("7").stdout);
    assert_ne!(run("7").stdout, run("8").stdout);
    assert_eq!(run("x").status.code(), Some(2));
}
