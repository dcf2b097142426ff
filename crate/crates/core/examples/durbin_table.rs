//! Regenerates the cumulative-periodogram critical-value table by simulating
//! Gaussian white noise through the same periodogram and statistic used by
//! `durbin_test`. Prints rows ready to paste into `spectral.rs`.

use nlts::spectral::{cumulative_periodogram, periodogram};
use nlts::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

const REPS: usize = 400_000;

fn quantiles(n: usize) -> (f64, f64) {
    let mut stats: Vec<f64> = (0..REPS)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            rng.set_stream(rep as u64);
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let pg = periodogram(&TimeSeries::new(x).unwrap()).unwrap();
            cumulative_periodogram(&pg).unwrap().1
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| stats[((REPS as f64) * p) as usize];
    (q(0.95), q(0.90))
}

fn main() {
    let grid = [
        16, 18, 20, 22, 24, 26, 28, 30, 34, 40, 46, 50, 60, 70, 80, 90, 100, 110, 120, 125, 130,
        131, 135, 140, 150, 155, 160, 180, 200, 250, 300, 400, 500, 600, 800, 1000, 1024,
    ];
    for n in grid {
        let (c05, c10) = quantiles(n);
        println!("    ({n}, {c05:.4}, {c10:.4}),");
    }
}
