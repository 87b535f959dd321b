//! Reverse-mode gradients of the full bound against central differences.
//!
//! `cargo run --release --example gradcheck`

use geotracknet::ais::Roi;
use geotracknet::compute::{check_gradients, Tape, Var};
use geotracknet::fourhot::{EncodedTrack, FourHotSpec, FourHotVector};
use geotracknet::vrnn::{ModelConfig, ModelError, ParamId, VrnnModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = FourHotSpec {
        roi: Roi { lat_min: 48.0, lat_max: 48.1, lon_min: -5.0, lon_max: -4.9 },
        res_lat: 0.01,
        res_lon: 0.01,
        res_sog: 1.0,
        res_cog: 36.0,
        sog_max: 10.0,
    };
    let mut model = VrnnModel::new(spec.clone(), ModelConfig { hidden: 8, latent: 8, subnet_hidden: 8 }, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let normal = rand_distr::Normal::new(0.0, 0.3)?;
    for id in ParamId::ALL {
        model.param_mut(id).data_mut().iter_mut().for_each(|v| *v = rng.sample(normal));
    }
    let track = EncodedTrack {
        track_id: "demo".into(),
        mmsi: 1,
        t0: 0,
        dt: 600,
        spec,
        steps: (0..5).map(|i| FourHotVector { bins: [i + 2, 2 * i, 5, i % 10] }).collect(),
    };
    let report = check_gradients::<ModelError, _>(
        |tape: &mut Tape, vars: &[Var]| model.elbo_on_tape(tape, vars, &track, 1, 17),
        model.params(),
        1e-5,
    )?;
    println!("{report:#?}");
    let (p, j) = report.worst;
    println!("worst coordinate: {}[{j}]", ParamId::ALL[p].name());
    Ok(())
}
