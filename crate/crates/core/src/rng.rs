//! Seeded random streams. Every stochastic step in the crate draws from here so runs are
//! reproducible from a single integer seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for item `index` under `seed`.
pub fn derived(seed: u64, index: u64) -> SeededRng {
    seeded(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn standard_normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal_vec(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| standard_normal(rng)).collect()
}
