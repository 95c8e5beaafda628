use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cheeger-lab"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(sub).arg("--config").arg(config).arg("--out").arg(out).args(extra).env_remove("CHEEGER_LAB_THREADS").output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn workspace_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

const DISK: &str = r#"{
  "grid": { "dim": 2, "cells": 64, "lo": -1.25, "hi": 1.25 },
  "domain": { "kind": "ball", "center": [0.0, 0.0], "radius": 1.0 }
}"#;

const INTERIOR: &str = r#"{
  "grid": { "dim": 2, "cells": 128, "lo": -1.25, "hi": 1.25 },
  "family": {
    "kind": "hole",
    "domain": { "kind": "ball", "center": [0.0, 0.0], "radius": 1.0 },
    "centers": [[0.0, 0.0]],
    "deltas": [0.08, 0.06, 0.045, 0.03],
    "regime": "interior"
  }
}"#;

#[test]
fn solve_disk_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "disk.json", DISK);
    let out = dir.path().join("out");
    let o = run("solve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("result.json"));
    let lambda = r["result"]["lambda"].as_f64().unwrap();
    assert!((lambda / 2.0 - 1.0).abs() < 0.03, "{lambda}");
    assert_eq!(r["command"], "solve");
    assert_eq!(r["config"]["grid"]["cells"], 64);
    assert_eq!(r["modules"].as_object().unwrap().len(), 7);
    assert!(r["result"]["bounds"]["satisfied"].as_bool().unwrap());
    for f in ["u.pgm", "eigenset.pgm", "run.log"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let pgm = std::fs::read(out.join("eigenset.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n64 64\n65535\n"));
    assert_eq!(pgm.len(), "P5\n64 64\n65535\n".len() + 2 * 64 * 64);
}

#[test]
fn malformed_json_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{ \"grid\": ");
    let o = run("solve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &DISK.replace("\"radius\": 1.0", "\"radius\": 1.0, \"radious\": 2"));
    let o = run("solve", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn low_resolution_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "disk.json", DISK);
    let o = run("solve", &cfg, &dir.path().join("out"), &["--resolution", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolution"));
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "disk.json", DISK);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("solve", &cfg, &a, &["--seed", "5"]).status.code(), Some(0));
    assert_eq!(run("solve", &cfg, &b, &["--seed", "5"]).status.code(), Some(0));
    for f in ["result.json", "u.pgm", "eigenset.pgm"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn capacity_of_a_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("capacity", &workspace_config("capacity_ball.json"), &out, &["--resolution", "128"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&out.join("capacity.json"));
    let v = r["result"]["value"].as_f64().unwrap();
    assert!((v / (2.0 * std::f64::consts::PI * 0.3) - 1.0).abs() < 0.03, "{v}");
    assert!(r["result"]["closed_form"]["relative_error"].as_f64().unwrap() < 0.03);
}

#[test]
fn capacity_of_the_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("capacity", &workspace_config("capacity_empty.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&out.join("capacity.json"))["result"]["value"].as_f64(), Some(0.0));
}

#[test]
fn overlapping_balls_flag_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("capacity", &workspace_config("capacity_overlap.json"), &out, &["--resolution", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&out.join("capacity.json"));
    assert_eq!(r["result"]["closed_form"]["overlap_fallback"], true);
    assert_eq!(r["result"]["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn interior_hole_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hole.json", INTERIOR);
    let out = dir.path().join("out");
    let o = run("perturb", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,driver,lambda,lambda_minus_base,eigenset_l1_distance,tv_mass"));
    assert_eq!(lines.count(), 4);
    let s = json(&out.join("summary.json"));
    let slope = s["result"]["fit"]["coefficient"].as_f64().unwrap();
    assert!((slope / 2.0 - 1.0).abs() < 0.1, "{slope}");
    assert_eq!(s["result"]["regime"], "interior");
    let svg = std::fs::read_to_string(out.join("plot.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("version=\"1.1\"") && svg.matches("<circle").count() == 4);
}

#[test]
fn perturbation_outputs_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hole.json", INTERIOR);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("perturb", &cfg, &a, &["--threads", "1"]).status.code(), Some(0));
    let o = bin().args(["perturb", "--config"]).arg(&cfg).arg("--out").arg(&b).env("CHEEGER_LAB_THREADS", "3").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("samples.csv")).unwrap(), std::fs::read(b.join("samples.csv")).unwrap());
    let (ja, jb) = (json(&a.join("summary.json")), json(&b.join("summary.json")));
    assert_eq!(ja["result"], jb["result"]);
    assert_eq!(ja["config"]["options"]["threads"], 1);
    assert_eq!(jb["config"]["options"]["threads"], 3);
}

#[test]
fn scaling_family_derivative() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("perturb", &workspace_config("scaling.json"), &out, &["--resolution", "128"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let s = json(&out.join("summary.json"));
    for d in s["result"]["derivatives"].as_array().unwrap() {
        let q = d["quotient"].as_f64().unwrap();
        assert!((q - 1.0).abs() < 0.05, "{q}");
    }
}

#[test]
fn corner_hole_is_inconclusive_or_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run("perturb", &workspace_config("hole_corner.json"), &out, &["--resolution", "128"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["result"]["predicted_coefficient"].as_f64(), Some(0.0));
    assert!(stdout.contains("inconclusive: below noise floor") || s["result"]["inconclusive"].is_null());
}

#[test]
fn merge_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "disk.json", DISK);
    let a = dir.path().join("a");
    assert_eq!(run("solve", &cfg, &a, &[]).status.code(), Some(0));
    let c = dir.path().join("c");
    assert_eq!(run("capacity", &workspace_config("capacity_empty.json"), &c, &[]).status.code(), Some(0));
    let out = dir.path().join("merged");
    let o = bin().arg("report-merge").arg(a.join("result.json")).arg(c.join("capacity.json")).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m = json(&out.join("merged.json"));
    assert_eq!(m["result"]["passed"], true);
    let commands: Vec<&str> = m["result"]["reports"].as_array().unwrap().iter().map(|r| r["command"].as_str().unwrap()).collect();
    assert_eq!(commands, ["solve", "capacity"]);
}

#[test]
fn shipped_configs_parse() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["disk.json", "annulus.json", "square.json"] {
        let o = run("solve", &workspace_config(name), &dir.path().join(name), &["--resolution", "64"]);
        assert_ne!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
