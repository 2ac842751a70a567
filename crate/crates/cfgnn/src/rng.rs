//! Deterministic seed derivation.
//!
//! Every run is driven by a single master seed. Independent random streams
//! (parameter init, splits, edge dropout, resampling, ...) derive their own
//! sub-seed from the master seed and a string label, so adding a new consumer
//! never perturbs the streams of existing ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche behaviour for cheap seed mixing.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a master seed and a stream label.
pub fn subseed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label keeps the derivation platform-independent.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(master ^ h)
}

/// A seeded RNG for the stream identified by `label`.
pub fn stream_rng(master: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(master, label))
}
