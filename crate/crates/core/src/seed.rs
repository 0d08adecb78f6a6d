//! Deterministic seed derivation.
//!
//! Child seeds are pure functions of their parent seed and a tag, so adding
//! generations, documents or cells never perturbs the seeds of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Child seed keyed by a string (e.g. a document id).
pub fn derive_str(parent: u64, key: &str) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(key.as_bytes());
    derive(parent, h.finish())
}

/// Domain tags keep sibling streams (shuffle, dropout, init...) apart.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const BALANCE: u64 = 4;
    pub const AUGMENT: u64 = 5;
    pub const GENERATION: u64 = 6;
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
