//! Seed derivation and the sampling generator.
//!
//! Every random stream in the crate comes from a ChaCha8 generator (a
//! counter-based stream cipher) keyed by a 64-bit seed. The 32-byte key is
//! the little-endian concatenation of four successive SplitMix64 outputs
//! started at the seed:
//!
//! ```text
//! state ← state + 0x9E3779B97F4A7C15            (wrapping)
//! z ← state
//! z ← (z ⊕ (z >> 30)) · 0xBF58476D1CE4E5B9       (wrapping)
//! z ← (z ⊕ (z >> 27)) · 0x94D049BB133111EB       (wrapping)
//! output z ⊕ (z >> 31)
//! ```
//!
//! Independent streams (sample paths, coverage trials) use
//! `derive(base, index) = splitmix64(base ⊕ splitmix64(index))` where
//! `splitmix64(v)` is the first SplitMix64 output started at state `v`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First SplitMix64 output from state `v`.
pub fn splitmix64(v: u64) -> u64 {
    mix(v.wrapping_add(GOLDEN_GAMMA))
}

/// Seed for stream `index` under `base`.
pub fn derive(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

/// The generator used for all sampling.
pub fn generator(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
