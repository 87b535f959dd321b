//! Bound properties of the sequence model over random parameters and tracks.

use geotracknet::ais::Roi;
use geotracknet::fourhot::{EncodedTrack, FourHotSpec, FourHotVector};
use geotracknet::vrnn::{ModelConfig, VrnnModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn tiny_spec() -> FourHotSpec {
    FourHotSpec {
        roi: Roi { lat_min: 48.0, lat_max: 48.1, lon_min: -5.0, lon_max: -4.9 },
        res_lat: 0.01,
        res_lon: 0.01,
        res_sog: 1.0,
        res_cog: 36.0,
        sog_max: 10.0,
    }
}

fn random_model(seed: u64, scale: f64) -> VrnnModel {
    let mut m = VrnnModel::new(tiny_spec(), ModelConfig { hidden: 8, latent: 8, subnet_hidden: 12 }, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, scale).unwrap();
    for id in geotracknet::vrnn::ParamId::ALL {
        for v in m.param_mut(id).data_mut() {
            *v = n.sample(&mut rng);
        }
    }
    m
}

fn track(bins: Vec<[usize; 4]>) -> EncodedTrack {
    EncodedTrack {
        track_id: "p".into(),
        mmsi: 1,
        t0: 0,
        dt: 600,
        spec: tiny_spec(),
        steps: bins.into_iter().map(|bins| FourHotVector { bins }).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn per_step_bound_is_nonpositive_and_kl_nonnegative(
        seed in 0u64..1_000_000,
        scale in 0.05f64..2.0,
        bins in prop::collection::vec([0usize..10, 0usize..10, 0usize..10, 0usize..10], 1..12),
        samples in 1usize..4,
    ) {
        let m = random_model(seed, scale);
        let b = m.elbo(&track(bins), samples, seed ^ 0xABCD).unwrap();
        for s in &b.steps {
            prop_assert!(s.kl >= 0.0);
            prop_assert!(s.reconstruction <= 0.0);
            prop_assert!(s.elbo <= 0.0);
            prop_assert!((s.elbo - (s.reconstruction - s.kl)).abs() <= 1e-9 * s.elbo.abs().max(1.0));
        }
        let sum: f64 = b.steps.iter().map(|s| s.elbo).sum();
        prop_assert!((sum - b.total).abs() <= 1e-9 * sum.abs().max(1.0));
    }
}

/// Averaging the reconstruction over more draws keeps the expectation and
/// shrinks the spread.
#[test]
fn more_samples_reduce_estimator_variance() {
    let m = random_model(11, 0.6);
    let t = track((0..6).map(|i| [i, (2 * i) % 10, 3, (i + 4) % 10]).collect());
    let runs = 200;
    let stats = |s: usize| {
        let xs: Vec<f64> = (0..runs).map(|r| m.elbo(&t, s, 1000 + r as u64).unwrap().total).collect();
        let mean = xs.iter().sum::<f64>() / runs as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        (mean, var)
    };
    let (m1, v1) = stats(1);
    let (m8, v8) = stats(8);
    assert!(v8 < v1, "var S=8 {v8} not below S=1 {v1}");
    let se = (v1 / runs as f64 + v8 / runs as f64).sqrt();
    assert!((m1 - m8).abs() < 4.0 * se, "means {m1} and {m8} differ by more than 4 se ({se})");
}
