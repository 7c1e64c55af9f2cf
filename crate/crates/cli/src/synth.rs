//! Synthetic instance generators for benchmarks, sweeps and the selftest.
//!
//! Deterministic for a fixed seed: the generator is ChaCha8 seeded
//! through `seed_from_u64`, so instances reproduce across platforms.

use otfs::measures::{quantile_quantizer, DiscreteMeasure};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Empirical measure of n uniform draws from [0, 1]^dim.
pub fn uniform_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DiscreteMeasure<f64> {
    let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    DiscreteMeasure::empirical(dim, coords).expect("generated cloud is valid")
}

/// The 1-D pair used by the scaling benchmarks: the n-point quantile
/// quantizer of uniform[0, 1] against an n-sample empirical measure of
/// the same distribution.
pub fn quantizer_vs_empirical(
    rng: &mut ChaCha8Rng,
    n: usize,
) -> (DiscreteMeasure<f64>, DiscreteMeasure<f64>) {
    let quantized = quantile_quantizer(|u: f64| u, n).expect("uniform quantizer is valid");
    let empirical = uniform_cloud(rng, n, 1);
    (quantized, empirical)
}

/// A random measure with non-uniform weights, used by the selftest.
pub fn weighted_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DiscreteMeasure<f64> {
    let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::new(dim, coords, weights).expect("generated cloud is valid")
}
