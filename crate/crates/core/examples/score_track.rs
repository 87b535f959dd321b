//! Per-message scores of one track under a freshly initialized model:
//! reconstruction, KL and their difference at every step.
//!
//! `cargo run --release --example score_track`

use geotracknet::ais::Roi;
use geotracknet::fourhot::FourHotSpec;
use geotracknet::store::{preprocess, PreprocessConfig};
use geotracknet::synth::{generate_scenario, Counts, Scenario};
use geotracknet::vrnn::{ModelConfig, VrnnModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_scenario(&Scenario::crossing_routes(Counts { train: 1, validation: 0, test: 0 }, 1))?;
    let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
    let (tracks, _) = preprocess(&data.train[0].messages, &spec, &PreprocessConfig::default())?;
    let track = &tracks[0];

    let model = VrnnModel::new(spec, ModelConfig::new(32), 0)?;
    println!("{} parameters", model.num_parameters());
    let b = model.elbo(track, 8, 42)?;
    for (t, s) in b.steps.iter().enumerate().take(10) {
        println!("t={t:>2}  recon {:>9.4}  kl {:>8.4}  elbo {:>9.4}", s.reconstruction, s.kl, s.elbo);
    }
    println!("... {} steps, total {:.3}, mean per message {:.4}", b.steps.len(), b.total, b.total / b.steps.len() as f64);
    Ok(())
}
