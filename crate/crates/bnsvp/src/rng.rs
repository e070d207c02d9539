//! Seeding helpers for reproducible sampling.
//!
//! Every stochastic entry point in this crate takes a `u64` seed and builds
//! its generator through these helpers, so reruns with the same seed produce
//! byte-identical output on every platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The pseudo-random generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Builds the crate-wide generator from a bare seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from a base seed and a stream index.
///
/// Used to give each bag (or each refresh round) its own generator without
/// coupling the draw counts of unrelated sampling loops.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// SplitMix64 finalizer; a cheap, well-mixed u64 -> u64 permutation.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
