//! Binomial tails, segment counts and the minimum-NFA segment of a flag
//! pattern, plus a quick look at calibration on null tracks.
//!
//! `cargo run --release --example binomial_tail`

use geotracknet::contrario::{binomial_tail, n_segments, sweep_epsilon, Detector, DetectorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = 0.1;
    for (n, k) in [(3, 1), (10, 4), (50, 20), (100, 60)] {
        println!("B({n}, {k}, {p}) = {:.3e}", binomial_tail(n, k, p)?);
    }
    println!("segments of a 3-message track: {}", n_segments(3));

    let det = Detector::new(DetectorConfig::new(1.0))?;
    let pattern = "....X.....XXXXX.X...........";
    let flags: Vec<bool> = pattern.chars().map(|c| c == 'X').collect();
    let seg = det.min_nfa(&flags)?;
    println!("{pattern}\n{}{}", " ".repeat(seg.start), "^".repeat(seg.n));
    println!("k = {} of n = {}, NFA = {:.3e}", seg.k, seg.n, seg.nfa());

    // null tracks: independent flags at rate p
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logs: Vec<f64> = (0..2000)
        .map(|_| {
            let f: Vec<bool> = (0..100).map(|_| rng.random_bool(p)).collect();
            det.min_nfa(&f).map(|s| s.log_nfa)
        })
        .collect::<Result<_, _>>()?;
    for (eps, count) in sweep_epsilon(&logs, &[1.0, 0.1, 0.01])? {
        println!("epsilon {eps:>5}: {count} of 2000 null tracks flagged");
    }
    Ok(())
}
