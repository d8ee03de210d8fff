//! End-to-end checks of the command-line surface: schemas, exit codes,
//! caching, and byte determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_knotfield")
}

fn write_knot(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn unknot_file(dir: &Path) -> PathBuf {
    write_knot(dir, "unknot.json", r#"{ "kind": "torus", "p": 1, "q": 0, "R": 1.0, "r": 1.0 }"#)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn knotfield")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("knotfield-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn eval_circle_center_prints_two_pi() {
    let dir = tempdir("eval");
    let knot = unknot_file(&dir);
    let out = run(&["eval", "--knot", knot.to_str().unwrap(), "--point", "0,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let phi = v["phi"].as_f64().unwrap();
    assert!((phi - std::f64::consts::TAU).abs() < 1e-10);
    for key in ["x", "phi", "grad", "hess", "nodes_used", "est_error"] {
        assert!(v.get(key).is_some(), "missing key {key}");
    }
}

#[test]
fn eval_on_the_wire_exits_2() {
    let dir = tempdir("eval2");
    let knot = unknot_file(&dir);
    let out = run(&["eval", "--knot", knot.to_str().unwrap(), "--point", "1.0,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_knot_file_exits_3_and_names_the_key() {
    let dir = tempdir("parse");
    let knot = write_knot(&dir, "bad.json", r#"{ "kind": "torus", "p": 2, "q": 3, "R": 2.0 }"#);
    let out = run(&["eval", "--knot", knot.to_str().unwrap(), "--point", "0,0,0"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('r'), "stderr should name the missing key: {err}");
}

#[test]
fn bad_point_syntax_exits_3() {
    let dir = tempdir("point");
    let knot = unknot_file(&dir);
    let out = run(&["eval", "--knot", knot.to_str().unwrap(), "--point", "1,2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn scan_writes_exports_with_exact_keys() {
    let dir = tempdir("scan");
    let knot = unknot_file(&dir);
    let out_dir = dir.join("out");
    let out = run(&[
        "scan",
        "--knot",
        knot.to_str().unwrap(),
        "--grid",
        "12",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(out_dir.join("critical_points.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 1);
    for key in ["x", "phi", "residual", "eigvals", "eigvecs", "index", "nondeg_margin"] {
        assert!(arr[0].get(key).is_some(), "missing key {key}");
    }
    assert_eq!(arr[0]["index"].as_u64(), Some(1));
    let csv = std::fs::read_to_string(out_dir.join("critical_points.csv")).unwrap();
    assert!(csv.starts_with('#'), "csv self-describes in a header");
    assert!(csv.contains("x0,x1,x2,phi"));
    assert!(out_dir.join("run_meta.json").exists());
    assert!(out_dir.join(".cache").exists(), "scan cache written");
}

#[test]
fn flow_writes_obj_and_csv() {
    let dir = tempdir("flow");
    let knot = unknot_file(&dir);
    let out_dir = dir.join("out");
    let out = run(&[
        "flow",
        "--knot",
        knot.to_str().unwrap(),
        "--grid",
        "12",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let obj = std::fs::read_to_string(out_dir.join("arcs.obj")).unwrap();
    assert!(obj.contains("o theta_0_+"), "obj names arcs: {}", &obj[..obj.len().min(200)]);
    assert!(obj.contains("\nv ") && obj.contains("\nl "));
    let csv = std::fs::read_to_string(out_dir.join("arcs.csv")).unwrap();
    assert!(csv.contains("arc,step,x,y,z,phi"));
    assert!(csv.contains("theta_0_-"));
}

#[test]
fn report_runs_are_byte_identical_and_cache_reuses() {
    let dir = tempdir("report");
    let knot = unknot_file(&dir);
    let (d1, d2) = (dir.join("r1"), dir.join("r2"));
    let a = run(&[
        "report", "--knot", knot.to_str().unwrap(), "--grid", "12", "--out", d1.to_str().unwrap(),
    ]);
    assert_eq!(a.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&a.stderr));
    let b = run(&[
        "report", "--knot", knot.to_str().unwrap(), "--grid", "12", "--out", d2.to_str().unwrap(),
    ]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout, "fresh runs differ");
    let f1 = std::fs::read(d1.join("report.json")).unwrap();
    let f2 = std::fs::read(d2.join("report.json")).unwrap();
    assert_eq!(f1, f2);
    // Third run against the first directory reuses the cache.
    let c = run(&[
        "report", "--knot", knot.to_str().unwrap(), "--grid", "12", "--out", d1.to_str().unwrap(),
    ]);
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(a.stdout, c.stdout, "cached run differs");

    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    for key in [
        "knot", "m", "cp_found", "betti", "euler_ok", "lemma22_ok", "t_known", "bound_ok",
        "margin", "notes", "meta",
    ] {
        assert!(v.get(key).is_some(), "missing report key {key}");
    }
    assert_eq!(v["cp_found"].as_u64(), Some(2));
    assert_eq!(v["bound_ok"].as_bool(), Some(true));
    assert_eq!(v["margin"].as_i64(), Some(0));
    assert_eq!(v["betti"], serde_json::json!([1, 1, 0, 0]));
}

#[test]
fn oracle_subcommand_reports_reference_values() {
    let dir = tempdir("oracle");
    let knot = unknot_file(&dir);
    let out = run(&["oracle", "--knot", knot.to_str().unwrap(), "--point", "0,0,0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let phi = v["phi_reference"].as_f64().unwrap();
    let exact = std::f64::consts::TAU / (1.0 + 0.25f64).sqrt();
    assert!((phi - exact).abs() < 1e-10 * exact);
    assert!(v["phi_rel_difference"].as_f64().unwrap() < 1e-9);
}
