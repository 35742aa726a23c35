//! End-to-end runs of the `polyflow` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn polyflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyflow")).args(args).env_remove("POLYFLOW_SEED").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("polyflow-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write_manifest(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("manifest.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn continued_fraction_json() {
    let o = polyflow(&["cf", "expand", "2 + sqrt(5)", "--depth", "6"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["source"], "2 + 1*sqrt(5)");
    let o = polyflow(&["--format", "csv", "cf", "expand", "2 + sqrt(5)", "--depth", "3"]);
    assert_eq!(stdout(&o), "index,digit\n0,4\n1,4\n2,4\n3,4\n");
}

#[test]
fn surface_queries() {
    let o = polyflow(&["surface", "pdist", "1:0", "0:1"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["p_distance"], 2);
    let o = polyflow(&["surface", "streets", "-s", "cube-4copy"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["street_lcm"], 4);
    let o = polyflow(&["surface", "pdist", "0:0", "9:9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("9:9"));
}

#[test]
fn surface_file_round_trip() {
    let dir = scratch("roundtrip");
    let o = polyflow(&["surface", "build", "-s", "gap-wall-13"]);
    assert!(o.status.success());
    let path = dir.join("gap.json");
    std::fs::write(&path, &o.stdout).unwrap();
    let o = polyflow(&["surface", "streets", "--file", path.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["street_lcm"], 60);
}

#[test]
fn trace_csv_has_exact_columns() {
    let o = polyflow(&["--format", "csv", "trace", "--budget", "3"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,face,side,coord,arclen,arclen_f64"));
    assert_eq!(lines.next(), Some("0,0:0,T,-1 + 1*sqrt(2),-1 + 1*sqrt(2),0.41421356237309515"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn tower_and_plot_data() {
    let o = polyflow(&["cyl", "tower", "--k", "2", "--m", "6"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["x0"].as_u64(), v["bounces_back"].as_bool()), (Some(2), Some(true)));
    let o = polyflow(&["--plot-data", "density", "--n", "4,8"]);
    let text = stdout(&o);
    assert!(text.starts_with("# n length\n4 "));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn seed_flag_and_env_agree() {
    let args = ["--format", "csv", "periodic", "--max", "2", "--samples", "5"];
    let a = polyflow(&[&["--seed", "9"][..], &args].concat());
    let b = Command::new(env!("CARGO_BIN_EXE_polyflow")).args(args).env("POLYFLOW_SEED", "9").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = polyflow(&[&["--jobs", "1", "--seed", "9"][..], &args].concat());
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn run_manifest_writes_artifacts() {
    let dir = scratch("run");
    let m = write_manifest(
        &dir,
        r#"{"seed": 1, "tasks": [
            {"task": "density", "output": "density.csv", "surface": {"name": "L-surface"},
             "slope": "1 + sqrt(2)", "n": [8, 16, 32], "expect_exponent": [0.5, 1.5]},
            {"task": "tower_sweep", "output": "towers.csv", "k_max": 12, "m_max": 25, "check_oracle": true}
        ]}"#,
    );
    let out = dir.join("out");
    let o = polyflow(&["run", m.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("density.csv").exists());
    let towers = std::fs::read_to_string(out.join("towers.csv")).unwrap();
    assert!(towers.lines().count() > 500);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn failing_check_exits_one() {
    let dir = scratch("fail");
    let m = write_manifest(
        &dir,
        r#"{"seed": 0, "tasks": [
            {"task": "search", "output": "s.csv", "a": "1/2", "b": "1/2", "bound": 2, "expect": "none"}
        ]}"#,
    );
    let o = polyflow(&["run", m.to_str().unwrap(), "--out-dir", dir.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn schema_error_exits_two() {
    let dir = scratch("schema");
    let m = write_manifest(
        &dir,
        r#"{"seed": 0, "tasks": [
            {"task": "density", "output": "d.csv", "surface": {"name": "L-surface"}, "slope": "1 + sqrt(", "n": [8]}
        ]}"#,
    );
    let o = polyflow(&["run", m.to_str().unwrap(), "--out-dir", dir.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));
    let missing = write_manifest(
        &dir,
        r#"{"seed": 0, "tasks": [
            {"task": "cylinders", "output": "c.csv", "surface": {"file": "nope.json"}, "slope": "1"}
        ]}"#,
    );
    let o = polyflow(&["run", missing.to_str().unwrap(), "--out-dir", dir.join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
