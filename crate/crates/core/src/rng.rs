//! Named, seedable random streams.
//!
//! Every stochastic stage draws from its own stream derived from a master
//! seed and a label, so adding draws to one stage never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Derive the seed of the sub-stream `label` from `master`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then one splitmix64 finaliser round.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(master: u64, label: &str) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label))
}

pub fn from_seed(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}
