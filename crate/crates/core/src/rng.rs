//! Deterministic substream derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream derived from
//! `(master seed, purpose, node, round)`. Streams never persist across
//! rounds, so the draws a node sees cannot depend on scheduling or
//! worker-pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Purpose tag for trainer-state initialization at t = 0.
pub const STREAM_INIT: u64 = 1;
/// Purpose tag for a node's in-round draws (proposal noise, resampling).
pub const STREAM_ROUND: u64 = 2;
/// Purpose tag for the particle random walk of one round.
pub const STREAM_WALK: u64 = 3;
/// Purpose tag for synthetic data generation.
pub const STREAM_DATA: u64 = 4;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    mix(*state)
}

/// Derive an independent stream from the master seed and three counters.
pub fn substream(seed: u64, purpose: u64, a: u64, b: u64) -> ChaCha12Rng {
    let mut s = mix(seed ^ 0x6a09_e667_f3bc_c908);
    for word in [purpose, a, b] {
        s = mix(s.wrapping_add(word).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha12Rng::from_seed(bytes)
}
