//! Cell map, detection and the report files: performance-map CSV, verdict
//! JSON Lines, GeoJSON and a threshold sweep.
//!
//! `cargo run --release --example detect_and_export -- [out_dir]`

use std::fs::File;
use std::path::PathBuf;

use geotracknet::ais::Roi;
use geotracknet::cellmap::{build_cell_map, export_performance_map, FormKind, MapConfig};
use geotracknet::contrario::{detect_tracks, sweep_epsilon, DetectorConfig};
use geotracknet::fourhot::FourHotSpec;
use geotracknet::report::{verdicts_geojson, write_verdicts_jsonl};
use geotracknet::store::{preprocess, PreprocessConfig};
use geotracknet::synth::{generate_scenario, AnomalyKind, AnomalySpec, Counts, Scenario, SynthTrack};
use geotracknet::vrnn::{train, ModelConfig, TrainConfig, VrnnModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("geotracknet-detect"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let mut scenario = Scenario::crossing_routes(Counts { train: 60, validation: 30, test: 6 }, 4);
    scenario.anomalies = vec![
        AnomalySpec { kind: AnomalyKind::SpeedDrop, magnitude: 0.2, onset: 0.3, span: 0.4 },
        AnomalySpec { kind: AnomalyKind::OffRoutePath, magnitude: 0.3, onset: 0.1, span: 0.1 },
    ];
    let data = generate_scenario(&scenario)?;
    let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
    let encode = |ts: &[SynthTrack]| {
        let msgs: Vec<_> = ts.iter().flat_map(|t| t.messages.clone()).collect();
        preprocess(&msgs, &spec, &PreprocessConfig::default()).map(|r| r.0)
    };
    let (train_set, valid_set, test_set) = (encode(&data.train)?, encode(&data.validation)?, encode(&data.test)?);

    let model = VrnnModel::new(spec.clone(), ModelConfig::new(16), 0)?;
    let cfg = TrainConfig { lr: 1e-2, batch_size: 16, max_epochs: 8, ..TrainConfig::default() };
    let (model, _) = train(model, &train_set, &valid_set, &cfg)?;

    let map_cfg = MapConfig { cell_size: 0.2, m_min: 30, form: FormKind::Kde, ..MapConfig::default() };
    let map = build_cell_map(&model, &valid_set, &map_cfg)?;
    export_performance_map(&map, out.join("performance.csv"))?;
    println!("{} active cells", map.active_cells());

    let det = DetectorConfig { samples: map_cfg.samples, ..DetectorConfig::new(0.1) };
    let verdicts = detect_tracks(&model, &map, &test_set, det)?;
    write_verdicts_jsonl(&verdicts, File::create(out.join("verdicts.jsonl"))?)?;
    let pairs: Vec<_> = test_set.iter().zip(&verdicts).collect();
    serde_json::to_writer(File::create(out.join("verdicts.geojson"))?, &verdicts_geojson(&pairs))?;
    for v in &verdicts {
        let kind = data.labels.iter().find(|l| l.mmsi == v.mmsi).and_then(|l| l.kind);
        println!("{:<24} abnormal {:<5} NFA {:.2e} uncovered {:>3}  {kind:?}", v.track_id, v.abnormal, v.segment.nfa(), v.uncovered);
    }
    let logs: Vec<f64> = verdicts.iter().map(|v| v.segment.log_nfa).collect();
    for (eps, n) in sweep_epsilon(&logs, &[10.0, 1.0, 0.1, 0.01, 1e-3])? {
        println!("epsilon {eps:>6}: {n} abnormal");
    }
    println!("reports written to {}", out.display());
    Ok(())
}
