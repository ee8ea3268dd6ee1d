//! Seed derivation and RNG construction.
//!
//! Everything random in this crate is driven by explicit 64-bit seeds.
//! Independent substreams (one per Monte-Carlo iteration, training epoch,
//! online update step, ...) are derived from a master seed with
//! [`split_seed`], so results do not depend on evaluation order.

pub use rand_chacha::ChaCha8Rng;

use rand_chacha::rand_core::SeedableRng;

/// Derives the seed of substream `stream` from a master seed.
///
/// The rule is fixed and documented so external code can reproduce any
/// substream: `splitmix64(master ^ ((stream + 1) * 0x9E3779B97F4A7C15))`.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ (stream.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// RNG for substream `stream` of `master`.
pub fn substream(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(master, stream))
}

/// RNG seeded directly with `seed`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
