//! Training on synthetic lanes with early stopping, then a checkpoint round
//! trip.
//!
//! `cargo run --release --example train_model -- [epochs]`

use geotracknet::ais::Roi;
use geotracknet::fourhot::FourHotSpec;
use geotracknet::store::{preprocess, PreprocessConfig};
use geotracknet::synth::{generate_scenario, Counts, Scenario, SynthTrack};
use geotracknet::vrnn::{train, ModelConfig, TrainConfig, VrnnModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let data = generate_scenario(&Scenario::crossing_routes(Counts { train: 40, validation: 10, test: 0 }, 2))?;
    let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
    let encode = |ts: &[SynthTrack]| {
        let msgs: Vec<_> = ts.iter().flat_map(|t| t.messages.clone()).collect();
        preprocess(&msgs, &spec, &PreprocessConfig::default()).map(|r| r.0)
    };
    let (train_set, valid_set) = (encode(&data.train)?, encode(&data.validation)?);

    let model = VrnnModel::new(spec.clone(), ModelConfig::new(16), 0)?;
    let cfg = TrainConfig { lr: 1e-2, batch_size: 8, max_epochs: epochs, patience: 3, ..TrainConfig::default() };
    let (best, history) = train(model, &train_set, &valid_set, &cfg)?;
    println!("initial validation ELBO {:.4}", history.initial_validation_elbo);
    for e in &history.epochs {
        println!("epoch {}: train {:.4}, validation {:.4}", e.epoch, e.train_elbo, e.validation_elbo);
    }
    println!("best epoch {:?}, stopped early: {}", history.best_epoch, history.stopped_early);

    let dir = std::env::temp_dir().join("geotracknet-train-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.gtn");
    best.save(&path)?;
    let loaded = VrnnModel::load(&path)?;
    let same = best.score_track(&valid_set[0], 4, 1)? == loaded.score_track(&valid_set[0], 4, 1)?;
    println!("checkpoint {} ({} bytes), hash {}, scores identical: {same}",
        path.display(), std::fs::metadata(&path)?.len(), loaded.content_hash());
    Ok(())
}
