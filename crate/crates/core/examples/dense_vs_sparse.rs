//! Cell-conditioned a contrario detection against global thresholding on
//! two lanes with very different traffic. At matched detection counts the
//! global threshold spends its budget on the poorly learned sparse lane.
//!
//! `cargo run --release --example dense_vs_sparse -- [epochs]`

use geotracknet::ais::Roi;
use geotracknet::cellmap::{build_cell_map, FormKind, MapConfig};
use geotracknet::contrario::{detect_tracks, global_threshold_detect, DetectorConfig};
use geotracknet::fourhot::FourHotSpec;
use geotracknet::store::{preprocess, PreprocessConfig};
use geotracknet::synth::{generate_scenario, Counts, RouteTemplate, Scenario, SynthTrack};
use geotracknet::vrnn::{track_seed, train, ModelConfig, TrainConfig, VrnnModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let templates = vec![
        RouteTemplate::new(vec![(47.7, -6.8), (48.3, -4.2)], 12.0, 0.005, 0.85),
        RouteTemplate::new(vec![(48.7, -6.8), (49.3, -4.2)], 12.0, 0.005, 0.15),
    ];
    let scenario = Scenario::new(Roi::USHANT, templates, Counts { train: 200, validation: 200, test: 80 }, 11);
    let data = generate_scenario(&scenario)?;
    let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
    let encode = |ts: &[SynthTrack]| {
        let msgs: Vec<_> = ts.iter().flat_map(|t| t.messages.clone()).collect();
        preprocess(&msgs, &spec, &PreprocessConfig::default()).map(|r| r.0)
    };
    let (train_set, valid_set, test_set) = (encode(&data.train)?, encode(&data.validation)?, encode(&data.test)?);

    let model = VrnnModel::new(spec.clone(), ModelConfig::new(16), 0)?;
    let cfg = TrainConfig { lr: 1e-2, max_epochs: epochs, patience: epochs, ..TrainConfig::default() };
    let (model, history) = train(model, &train_set, &valid_set, &cfg)?;
    println!("validation ELBO {:.3} -> {:.3}", history.initial_validation_elbo, history.best_validation_elbo);

    let map_cfg = MapConfig { cell_size: 0.2, form: FormKind::Kde, ..MapConfig::default() };
    let map = build_cell_map(&model, &valid_set, &map_cfg)?;
    let verdicts = detect_tracks(&model, &map, &test_set, DetectorConfig { samples: map_cfg.samples, ..DetectorConfig::new(0.1) })?;

    // all test tracks are normal here; the sparse lane is the northern one
    let sparse: Vec<bool> = test_set.iter().map(|t| t.decoded()[0].lat > 48.5).collect();
    let n_sparse = sparse.iter().filter(|s| **s).count();
    let flagged_ac: Vec<bool> = verdicts.iter().map(|v| v.abnormal).collect();
    let budget = flagged_ac.iter().filter(|f| **f).count();
    // log p(x) of each track, summed over its messages
    let totals: Vec<Vec<f64>> = test_set
        .iter()
        .map(|t| model.score_track(t, map_cfg.samples, track_seed(map_cfg.seed, &t.track_id)))
        .collect::<Result<_, _>>()?;
    let mut sums: Vec<f64> = totals.iter().map(|s| s.iter().sum()).collect();
    sums.sort_by(f64::total_cmp);
    // threshold between the budget-th and the next lowest total
    let threshold = if budget == 0 { f64::NEG_INFINITY } else { (sums[budget - 1] + sums[budget]) / 2.0 };
    let flagged_global: Vec<bool> = totals.iter().map(|s| global_threshold_detect(s, threshold)).collect();
    assert_eq!(flagged_global.iter().filter(|f| **f).count(), budget);
    let frac = |f: &[bool]| f.iter().zip(&sparse).filter(|(f, s)| **f && **s).count() as f64 / n_sparse as f64;
    println!("{} test tracks, {n_sparse} on the sparse lane, {budget} flagged at epsilon 0.1", test_set.len());
    println!("sparse-lane fraction flagged: a contrario {:.3}, global threshold {:.3}", frac(&flagged_ac), frac(&flagged_global));
    Ok(())
}
