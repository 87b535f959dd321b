//! The five commands chained through the binary on a small scenario.

use std::fs;
use std::path::Path;
use std::process::Command;

use geotracknet::report::{read_verdicts, validate_geojson};
use geotracknet::synth::{generate_scenario, AnomalyKind, AnomalySpec, Counts, Scenario};
use serde_json::{json, Value};

fn write_inputs(dir: &Path) {
    let mut s = Scenario::crossing_routes(Counts { train: 12, validation: 8, test: 4 }, 21);
    s.anomalies = vec![AnomalySpec { kind: AnomalyKind::SpeedDrop, magnitude: 0.2, onset: 0.3, span: 0.4 }];
    generate_scenario(&s).unwrap().write_dir(dir).unwrap();
    let cfg = json!({
        "seed": 5,
        "model": { "hidden": 8, "subnet_hidden": 16 },
        "train": { "lr": 0.003, "batch_size": 4, "max_epochs": 2 },
        "map": { "m_min": 5, "form": "kde" },
        "detector": { "epsilon": 1.0, "samples": 2 },
        "paths": {
            "train_csv": "train.csv", "validation_csv": "validation.csv", "test_csv": "test.csv",
            "train_store": "train.json", "validation_store": "validation.json", "test_store": "test.json",
            "checkpoint": "model.gtn", "history_csv": "history.csv",
            "cellmap": "cells.gtn", "performance_csv": "performance.csv",
            "verdicts": "verdicts.jsonl", "geojson": "verdicts.geojson", "sweep_csv": "sweep.csv",
            "labels": "labels.jsonl", "eval_report": "eval.json"
        }
    });
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

fn run(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_geotracknet"))
        .args(args)
        .arg("--config")
        .arg(dir.join("config.json"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn pipeline(dir: &Path) {
    write_inputs(dir);
    for cmd in [&["preprocess"][..], &["train"], &["build-map"], &["detect"], &["eval"]] {
        let (code, text) = run(dir, cmd);
        assert_eq!(code, 0, "{cmd:?}: {text}");
    }
}

#[test]
fn pipeline_runs_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for f in ["train.json", "test.json", "model.gtn", "history.csv", "cells.gtn", "verdicts.jsonl", "eval.json"] {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs between identical runs");
    }

    let dir = a.path();
    let verdicts = read_verdicts(&fs::read_to_string(dir.join("verdicts.jsonl")).unwrap()).unwrap();
    assert_eq!(verdicts.len(), 5);
    let geo: Value = serde_json::from_str(&fs::read_to_string(dir.join("verdicts.geojson")).unwrap()).unwrap();
    validate_geojson(&geo).unwrap();
    let history = fs::read_to_string(dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,train_elbo,validation_elbo"));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["anomalies"], 1);
    assert_eq!(report["normals"], 4);
    let sidecar = fs::read_to_string(dir.join("train.errors.csv")).unwrap();
    assert_eq!(sidecar.trim(), "row,reason");

    let (code, text) = run(dir, &["detect", "--sweep", "10,1,0.1"]);
    assert_eq!(code, 0, "{text}");
    let table = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let counts: Vec<usize> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(counts.len(), 3);
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "sweep counts must not grow as epsilon shrinks");
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    // no store yet: data error
    assert_eq!(run(dir.path(), &["train"]).0, 2);
    // malformed config: usage error
    fs::write(dir.path().join("config.json"), "{ not json").unwrap();
    assert_eq!(run(dir.path(), &["train"]).0, 1);
    let bad = Command::new(env!("CARGO_BIN_EXE_geotracknet")).arg("launch").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn malformed_rows_go_to_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let path = dir.path().join("train.csv");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("123,not-a-time,48.0,-5.0,10,90\n");
    fs::write(&path, text).unwrap();
    assert_eq!(run(dir.path(), &["preprocess"]).0, 0);
    let sidecar = fs::read_to_string(dir.path().join("train.errors.csv")).unwrap();
    assert_eq!(sidecar.lines().count(), 2);
    let store: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("train.json")).unwrap()).unwrap();
    assert_eq!(store["summary"]["parse_errors"], 1);
}
