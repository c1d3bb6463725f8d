//! Seed handling.
//!
//! Every random decision in the crate is drawn from a ChaCha stream keyed by
//! an explicit 64-bit seed. Sub-streams are derived by mixing a purpose label
//! and counters into the seed, so that parallel work items never share state
//! and results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `seed` with no derivation.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for an independent sub-stream identified by `label` and `parts`.
pub fn derive(seed: u64, label: &str, parts: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, parts))
}

/// Mixes a label and counters into a seed (splitmix64 finalizer per word).
pub fn derive_seed(seed: u64, label: &str, parts: &[u64]) -> u64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    for b in label.bytes() {
        h = mix(h ^ u64::from(b));
    }
    for &p in parts {
        h = mix(h ^ p);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
