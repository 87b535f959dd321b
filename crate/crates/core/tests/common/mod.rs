#![allow(dead_code)]

use geotracknet::ais::Roi;
use geotracknet::fourhot::{EncodedTrack, FourHotSpec};
use geotracknet::store::{preprocess, PreprocessConfig};
use geotracknet::synth::{generate_scenario, Counts, LabeledDataset, Scenario, SynthTrack};

pub fn ushant() -> FourHotSpec {
    FourHotSpec::with_default_resolution(Roi::USHANT)
}

pub fn encode(tracks: &[SynthTrack]) -> Vec<EncodedTrack> {
    let messages: Vec<_> = tracks.iter().flat_map(|t| t.messages.iter().cloned()).collect();
    preprocess(&messages, &ushant(), &PreprocessConfig::default()).unwrap().0
}

/// Crossing-routes data with the given counts.
pub fn small_dataset(train: usize, validation: usize, test: usize, seed: u64) -> LabeledDataset {
    generate_scenario(&Scenario::crossing_routes(Counts { train, validation, test }, seed)).unwrap()
}
