//! Stable seed derivation.
//!
//! Every random stream in the crate is keyed by a 64-bit seed derived from a
//! master seed through [`mix`]. The mixing function is SplitMix64's finalizer,
//! so derived seeds are reproducible across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines `seed` with `value` into a new, well-mixed seed.
pub fn mix(seed: u64, value: u64) -> u64 {
    finalize(seed.wrapping_add(GOLDEN).wrapping_add(finalize(value.wrapping_add(GOLDEN))))
}

/// FNV-1a over a label, used to fold names (e.g. scheme names) into seeds.
pub fn label(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Per-trial seed: depends only on the master seed, the trial index and the
/// scheme, never on scheduling order.
pub fn trial_seed(master: u64, trial: u64, scheme: &str) -> u64 {
    mix(mix(master, trial), label(scheme))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
