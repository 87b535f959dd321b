//! Full pipeline on the crossing-routes scenario: generate, preprocess,
//! train, build the cell map, detect and evaluate over a range of
//! thresholds.
//!
//! `cargo run --release --example synthetic_pipeline -- [epochs] [lr]`

use std::time::Instant;

use geotracknet::ais::Roi;
use geotracknet::cellmap::{build_cell_map, FormKind, MapConfig};
use geotracknet::contrario::{detect_tracks, DetectorConfig};
use geotracknet::fourhot::FourHotSpec;
use geotracknet::report::{evaluate, VerdictRecord};
use geotracknet::store::{preprocess, PreprocessConfig};
use geotracknet::synth::{generate_scenario, AnomalyKind, AnomalySpec, Counts, Scenario, SynthTrack};
use geotracknet::vrnn::{train, ModelConfig, TrainConfig, VrnnModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map_or(Ok(30), |s| s.parse())?;
    let lr: f64 = args.get(2).map_or(Ok(1e-2), |s| s.parse())?;

    let mut scenario = Scenario::crossing_routes(Counts { train: 200, validation: 50, test: 20 }, 7);
    let a = |kind, magnitude, onset, span| AnomalySpec { kind, magnitude, onset, span };
    scenario.anomalies = vec![
        a(AnomalyKind::OffRoutePath, 0.3, 0.1, 0.1),
        a(AnomalyKind::RouteDeviation, 0.15, 0.3, 0.3),
        a(AnomalyKind::RouteDeviation, 0.1, 0.4, 0.3),
        a(AnomalyKind::SpeedDrop, 0.2, 0.3, 0.4),
        a(AnomalyKind::UTurn, 0.05, 0.4, 0.2),
    ];
    let data = generate_scenario(&scenario)?;
    let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
    let encode = |ts: &[SynthTrack]| {
        let msgs: Vec<_> = ts.iter().flat_map(|t| t.messages.clone()).collect();
        preprocess(&msgs, &spec, &PreprocessConfig::default()).map(|r| r.0)
    };
    let (train_set, valid_set, test_set) = (encode(&data.train)?, encode(&data.validation)?, encode(&data.test)?);
    println!("tracks: {} train, {} validation, {} test", train_set.len(), valid_set.len(), test_set.len());

    let clock = Instant::now();
    let model = VrnnModel::new(spec.clone(), ModelConfig::new(32), 0)?;
    let cfg = TrainConfig { lr, max_epochs: epochs, patience: epochs, ..TrainConfig::default() };
    let (model, history) = train(model, &train_set, &valid_set, &cfg)?;
    for e in &history.epochs {
        println!("epoch {:>2}: train {:.4} validation {:.4}", e.epoch, e.train_elbo, e.validation_elbo);
    }
    println!("training took {:.1} s", clock.elapsed().as_secs_f64());

    let map_cfg = MapConfig { cell_size: 0.2, form: FormKind::Kde, ..MapConfig::default() };
    let map = build_cell_map(&model, &valid_set, &map_cfg)?;
    println!("{} active cells of {}", map.active_cells(), map.grid.n_cells());

    let det = DetectorConfig { samples: map_cfg.samples, ..DetectorConfig::new(1.0) };
    let verdicts = detect_tracks(&model, &map, &test_set, det)?;
    let mut ranked: Vec<_> = verdicts.iter().collect();
    ranked.sort_by(|a, b| a.segment.log_nfa.total_cmp(&b.segment.log_nfa));
    for v in ranked {
        let kind = data.labels.iter().find(|l| l.mmsi == v.mmsi).and_then(|l| l.kind);
        let label = kind.map_or("normal".to_string(), |k| format!("{k:?}"));
        println!("ln NFA {:>9.3}  {:<24} {label}", v.segment.log_nfa, v.track_id);
    }
    for eps in [1e-3f64, 1e-2, 0.1, 1.0, 10.0] {
        let records: Vec<VerdictRecord> = verdicts
            .iter()
            .map(|v| VerdictRecord {
                track_id: v.track_id.clone(),
                mmsi: v.mmsi,
                t0: v.t0,
                abnormal: v.segment.log_nfa < eps.ln(),
                min_nfa: v.segment.nfa(),
                log_min_nfa: v.segment.log_nfa,
            })
            .collect();
        let r = evaluate(&records, &data.labels);
        println!(
            "epsilon {eps:>6}: {}/{} anomalies, {}/{} normals",
            r.detected, r.anomalies, r.false_positives, r.normals
        );
    }
    Ok(())
}
