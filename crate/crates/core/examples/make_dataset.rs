//! Writes a labeled synthetic dataset and a matching pipeline config, ready
//! for the command-line tool:
//!
//! ```text
//! cargo run --example make_dataset -- /tmp/gtn
//! geotracknet preprocess --config /tmp/gtn/config.json
//! geotracknet train      --config /tmp/gtn/config.json
//! geotracknet build-map  --config /tmp/gtn/config.json
//! geotracknet detect     --config /tmp/gtn/config.json
//! geotracknet detect     --config /tmp/gtn/config.json --sweep 10,1,0.1,0.01
//! geotracknet eval       --config /tmp/gtn/config.json
//! ```

use std::path::PathBuf;

use geotracknet::cellmap::FormKind;
use geotracknet::config::PipelineConfig;
use geotracknet::synth::{generate_scenario, AnomalyKind, AnomalySpec, Counts, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("geotracknet-cli"), PathBuf::from);
    let mut scenario = Scenario::crossing_routes(Counts { train: 80, validation: 40, test: 10 }, 12);
    let a = |kind, magnitude| AnomalySpec { kind, magnitude, onset: 0.3, span: 0.4 };
    scenario.anomalies = vec![
        a(AnomalyKind::RouteDeviation, 0.15),
        a(AnomalyKind::SpeedDrop, 0.2),
        a(AnomalyKind::UTurn, 0.05),
    ];
    let data = generate_scenario(&scenario)?;
    data.write_dir(&dir)?;

    let mut cfg = PipelineConfig::default();
    cfg.model.hidden = 16;
    cfg.train.lr = 1e-2;
    cfg.train.max_epochs = 10;
    cfg.map.cell_size = 0.2;
    cfg.map.m_min = 30;
    cfg.map.form = FormKind::Kde;
    cfg.detector.epsilon = Some(0.1);
    let p = &mut cfg.paths;
    for (slot, name) in [
        (&mut p.train_csv, "train.csv"),
        (&mut p.validation_csv, "validation.csv"),
        (&mut p.test_csv, "test.csv"),
        (&mut p.train_store, "train.json"),
        (&mut p.validation_store, "validation.json"),
        (&mut p.test_store, "test.json"),
        (&mut p.checkpoint, "model.gtn"),
        (&mut p.history_csv, "history.csv"),
        (&mut p.cellmap, "cells.gtn"),
        (&mut p.performance_csv, "performance.csv"),
        (&mut p.verdicts, "verdicts.jsonl"),
        (&mut p.geojson, "verdicts.geojson"),
        (&mut p.sweep_csv, "sweep.csv"),
        (&mut p.labels, "labels.jsonl"),
        (&mut p.eval_report, "eval.json"),
    ] {
        *slot = Some(name.into());
    }
    cfg.validate()?;
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    println!("wrote {} train, {} validation, {} test tracks and config.json to {}",
        data.train.len(), data.validation.len(), data.test.len(), dir.display());
    Ok(())
}
