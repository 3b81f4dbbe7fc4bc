use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SQUARE: &str = r#"{
  "dim": 2,
  "alpha": 0.95,
  "atoms": [
    {"p": [0, 0], "m": "-1"},
    {"p": [1, 1], "m": "-1"},
    {"p": [1, 0], "m": "1"},
    {"p": [0, 1], "m": "1"}
  ]
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branchflow"))
        .args(args)
        .env_remove("BRANCHFLOW_VALUE_TOL")
        .env_remove("BRANCHFLOW_DISTINCT_TOL")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn solve_square() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "square.json", SQUARE);
    let v = json(&run(&["solve", "--input", &input]));
    assert_eq!(v["schema"], "1");
    assert_eq!(v["command"], "solve");
    assert_eq!(v["body"]["result"]["minimizers"].as_array().unwrap().len(), 2);
    let best = v["body"]["result"]["best_value"].as_f64().unwrap();
    assert!((best - 2.0).abs() < 1e-9);
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "square.json", SQUARE);
    let a = json(&run(&["solve", "--input", &input, "--alpha", "0.5", "--workers", "1"]));
    let b = json(&run(&["solve", "--input", &input, "--alpha", "0.5", "--workers", "3"]));
    assert_eq!(a, b);
    assert_ne!(a["config_hash"], json(&run(&["solve", "--input", &input]))["config_hash"]);
}

#[test]
fn bad_input_exits_one() {
    let dir = TempDir::new().unwrap();
    let broken = write(&dir, "broken.json", "{\"dim\": 2, \"atoms\": [");
    let out = run(&["solve", "--input", &broken]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(run(&["solve", "--input", &path(&dir, "missing.json")]).status.code(), Some(1));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn flat_norm_and_distance() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", SQUARE);
    assert!((json(&run(&["flat-norm", &a]))["body"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let shifted = SQUARE.replace("[0, 0]", "[0, 0.25]");
    let b = write(&dir, "b.json", &shifted);
    let d = json(&run(&["flat-norm", &a, &b]))["body"]["value"].as_f64().unwrap();
    assert!((d - 0.25).abs() < 1e-12, "{d}");
}

#[test]
fn enumerate_counts() {
    let out = run(&["enumerate-topologies", "--n", "4", "--count"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("35"));
}

#[test]
fn solve_then_plot() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "square.json", SQUARE);
    let report = path(&dir, "report.json");
    let log = path(&dir, "log.jsonl");
    assert!(run(&["solve", "--input", &input, "--out", &report, "--log", &log]).status.success());
    let svg = path(&dir, "plot.svg");
    assert!(run(&["plot", &report, "--svg", &svg]).status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.matches("<polyline").count() >= 4);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 1);
}

#[test]
fn local4_and_k0() {
    let v = json(&run(&[
        "local4", "--a=-4,0", "--b=-0.5,0.01", "--c=0.5,-0.01", "--d=4,0", "--k", "6", "--alpha", "0.5",
    ]));
    let label = v["body"]["classification"]["label"].as_str().unwrap_or_else(|| panic!("{v}"));
    assert!(label == "W" || label == "Z", "{label}");
    let v = json(&run(&["estimate-k0", "--alpha", "0.5"]));
    assert_eq!(v["body"]["k0"], 5);
}

#[test]
fn sweep_survives_a_bad_cell() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "sweep.json",
        r#"{"alphas": [0.5], "k": {"above_k0": [1]}, "geometries": 3, "rho": 0.01,
            "cells": [{"alpha": 0.5, "k": 1, "rho": 0.01, "shape": {"s": 0.5, "u_b": 1, "u_c": 1}}]}"#,
    );
    let csv = path(&dir, "out.csv");
    assert!(run(&["sweep", &spec, "--out", &csv]).status.success());
    let text = std::fs::read_to_string(Path::new(&csv)).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().filter(|l| l.contains(",failed,")).count(), 1);
}
