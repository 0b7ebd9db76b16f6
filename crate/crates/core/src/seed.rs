//! Counter-based seed derivation.
//!
//! Every stochastic component takes a `u64` seed. Child seeds are derived
//! from a master seed, a stream label and an index with SplitMix64, so work
//! items can be scheduled in any order without changing their randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels keep derived seeds of different subsystems apart.
pub mod stream {
    pub const SAMPLE: u64 = 0x5a4d_504c_0000_0001;
    pub const TRIAL: u64 = 0x5452_4941_0000_0002;
    pub const CLIQUE: u64 = 0x434c_4951_0000_0003;
    pub const SOLVE: u64 = 0x534f_4c56_0000_0004;
    pub const PARTICIPATION: u64 = 0x5041_5254_0000_0005;
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive the seed of work item `index` in `stream` under `master`.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream).wrapping_add(splitmix64(index)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
