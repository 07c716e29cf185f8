use std::process::{Command, Output};

fn fiberlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiberlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn stderr_code(out: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("json on stderr");
    v["code"].as_str().unwrap().to_string()
}

#[test]
fn classify_s2_euler_two() {
    let out = fiberlab(&["classify", "--base", "S2", "--euler", "2"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["total_space"], "L(2,1)");
    assert_eq!(v["euler"], 2);
}

#[test]
fn classify_negative_euler_on_torus() {
    let out = fiberlab(&["classify", "--base", "T2", "--euler", "-3"]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["euler"], -3);
}

#[test]
fn nonzero_euler_on_circle_is_rejected() {
    let out = fiberlab(&["classify", "--base", "S1", "--euler", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "InvalidEuler");
}

#[test]
fn unknown_subcommand_exits_two() {
    let out = fiberlab(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "UnknownSubcommand");
}

#[test]
fn missing_input_file_is_io_error() {
    let out = fiberlab(&["euler", "--cocycle", "/nonexistent/cocycle.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_code(&out), "IoError");
}

#[test]
fn heatflow_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = fiberlab(&["heatflow", "--grid", "64", "--seed", "3", "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    let mut lines = ta.lines();
    assert_eq!(lines.next(), Some("t,sup_displacement,min_derivative"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn csf_trace_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trace.csv");
    let out = fiberlab(&["csf", "--points", "64", "--out", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next(), Some("t,length,max_kappa,min_pair_dist"));
    assert_eq!(stdout_json(&out)["slope"], serde_json::json!([1, 2]));
}

#[test]
fn straighten_roundtrips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    let out_path = dir.path().join("out.json");
    let out = fiberlab(&[
        "straighten", "--nb", "8", "--nf", "32", "--save-input", input.to_str().unwrap(),
        "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let first = stdout_json(&out)["max_residual"].as_f64().unwrap();
    let again = fiberlab(&["straighten", "--model", "hopf", "--in", input.to_str().unwrap()]);
    assert!(again.status.success());
    assert!((stdout_json(&again)["max_residual"].as_f64().unwrap() - first).abs() < 1e-12);
    let slope = fiberlab(&["slope", "--in", out_path.to_str().unwrap()]);
    assert_eq!(slope.status.code(), Some(2));
}

#[test]
fn model_mismatch_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    let out = fiberlab(&["straighten", "--nb", "4", "--nf", "16", "--save-input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let bad = fiberlab(&["straighten", "--model", "flat-t2", "--in", input.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(stderr_code(&bad), "BadConfig");
}

#[test]
fn selftest_subset_passes() {
    let out = fiberlab(&["selftest", "--only", "1,2,8"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
}
