//! Raw AIS CSV to encoded tracks: parsing, ROI cleaning, track assembly,
//! resampling, voyage splitting and encoding, with the per-stage counts.
//!
//! `cargo run --example preprocess_csv [-- file.csv]`

use geotracknet::ais::{parse_ais_csv, CsvSchema, Roi};
use geotracknet::fourhot::FourHotSpec;
use geotracknet::store::{preprocess, PreprocessConfig};

fn demo_csv() -> String {
    let mut s = String::from("mmsi,timestamp,lat,lon,sog,cog\n");
    // a 6 h transit reported every 5 min
    for i in 0..=72 {
        s += &format!("227000001,{},{:.5},{:.5},12.0,60.0\n", 1_500_000_000 + i * 300, 48.0 + 0.004 * i as f64, -6.0 + 0.007 * i as f64);
    }
    // too short to keep
    for i in 0..=12 {
        s += &format!("227000002,{},48.8,{:.4},9.5,90.0\n", 1_500_000_000 + i * 600, -5.0 + 0.01 * i as f64);
    }
    s += "227000003,1500000000,52.0,-5.0,10.0,0.0\n"; // outside the region
    s += "227000004,yesterday,48.0,-5.0,10.0,0.0\n"; // malformed
    s
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?,
        None => demo_csv(),
    };
    let (messages, errors) = parse_ais_csv(text.as_bytes(), &CsvSchema::default())?;
    for e in &errors {
        println!("row {}: {}", e.row, e.reason);
    }
    let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
    let (tracks, mut summary) = preprocess(&messages, &spec, &PreprocessConfig::default())?;
    summary.parse_errors = errors.len();
    println!("{summary:#?}");
    for t in &tracks {
        println!("{}: {} steps of {} s starting at {}", t.track_id, t.len(), t.dt, t.t0);
    }
    Ok(())
}
