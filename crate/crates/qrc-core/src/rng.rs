//! Seed derivation for schedule-independent parallel runs.
//!
//! Every stochastic component (coupling draws, input series, shot noise)
//! derives its own stream from the master seed and a set of indices, so
//! results do not depend on worker scheduling or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for seed mixing.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a list of stream indices.
pub fn derive_seed(master: u64, indices: &[u64]) -> u64 {
    let mut acc = mix64(master);
    for &ix in indices {
        acc = mix64(acc ^ ix.wrapping_mul(0xd134_2543_de82_ef95));
    }
    acc
}

/// Deterministic RNG for a derived stream.
pub fn stream_rng(master: u64, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, indices))
}
