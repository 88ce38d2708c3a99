//! Seed derivation and small shared helpers.
//!
//! Every stochastic component draws from a ChaCha stream keyed by
//! (master seed, structural indices), so results are reproducible bit-for-bit
//! regardless of thread count or evaluation order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a child seed from a master seed and a path of indices (splitmix64
/// chain). Stable across platforms.
pub fn split_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = master;
    for &p in path {
        state = state.wrapping_add(0x9E3779B97F4A7C15).wrapping_add(p);
        state = splitmix64(state);
    }
    splitmix64(state)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seeded RNG for a derived stream.
pub fn stream_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(master, path))
}

/// A uniformly random angle in [-pi, pi) from a seed.
pub fn uniform_angle(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (rng.random::<f64>() - 0.5) * std::f64::consts::TAU
}

/// Evenly spaced grid of n points over [lo, hi], inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least 2 points");
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Logarithmically spaced grid of n points over [lo, hi], inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
