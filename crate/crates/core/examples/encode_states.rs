//! Four-hot encoding of AIS states on the Ushant grid.
//!
//! `cargo run --example encode_states`

use geotracknet::ais::{Roi, State};
use geotracknet::fourhot::FourHotSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = FourHotSpec::with_default_resolution(Roi::USHANT);
    println!("blocks {:?}, offsets {:?}, D = {}", spec.block_sizes(), spec.offsets(), spec.dim());

    let states = [
        State { lat: 48.005, lon: -5.42, sog: 12.3, cog: 247.0 },
        State { lat: 49.499, lon: -4.001, sog: 29.99, cog: 359.9 },
        State { lat: 47.5, lon: -7.0, sog: 0.0, cog: 0.0 },
    ];
    for s in &states {
        let v = spec.encode_state(s)?;
        let back = spec.decode_vector(&v)?;
        println!(
            "{s:?}\n  bins {:?}, active {:?}\n  decoded {back:?}",
            v.bins,
            v.active(&spec)
        );
    }
    // the dense form has exactly four ones
    let dense = spec.encode_state(&states[0])?.to_dense(&spec);
    println!("dense ones: {}", dense.iter().filter(|x| **x == 1.0).count());
    Ok(())
}
