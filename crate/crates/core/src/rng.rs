//! Counter-based seeding.
//!
//! A random stream is addressed by `(seed, sample, component)`; within a
//! matrix every row gets its own ChaCha stream. Two workers that sample the
//! same address always see the same numbers, whatever the thread layout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a child seed from a parent seed and a list of counters.
pub fn derive_seed(seed: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(mix(seed), |acc, &c| mix(acc ^ mix(c.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// The ChaCha stream for `row` of the matrix addressed by `seed`.
pub fn row_stream(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// A single stream for scalar noise (e.g. one DBM run).
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
