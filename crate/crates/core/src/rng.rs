//! Deterministic stream derivation.
//!
//! Every random stream in the engine is a pure function of a base seed plus
//! a list of tags (replica index, purpose, sample index, ...). Parallel
//! execution order therefore cannot change any result: a job owns its stream
//! and nothing is shared.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Purpose tags for stream separation. Distinct constants keep the disorder
/// stream, the skeleton sampler and the excursion filler decorrelated even
/// under equal seeds.
pub mod tag {
    pub const DISORDER: u64 = 0x01;
    pub const SKELETON: u64 = 0x02;
    pub const EXCURSION: u64 = 0x03;
    pub const MONTE_CARLO: u64 = 0x04;
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derive a 64-bit sub-seed from a base seed and one index. Used to assign
/// replica seeds from `(base_seed, replica_index)`.
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    splitmix(splitmix(base_seed) ^ splitmix(index.wrapping_add(0xA5A5_A5A5_A5A5_A5A5)))
}

/// A ChaCha12 stream keyed by `(seed, tags...)`.
pub fn rng_stream(seed: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = splitmix(seed ^ 0x6A09_E667_F3BC_C908);
    for &t in tags {
        state = splitmix(state ^ splitmix(t));
    }
    let mut key = [0u8; 32];
    let mut word = state;
    for chunk in key.chunks_exact_mut(8) {
        word = splitmix(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
