//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a seed
//! derived from one master seed and a path of integers naming the stream, for
//! example `[TREE, 17]` for the 18th tree of a forest. Derivation is a chain of
//! SplitMix64 finalizers, so sibling streams are decorrelated and no stream
//! depends on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags used by this crate.
pub mod stream {
    pub const TREE: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const CV_FIT: u64 = 3;
    pub const DATA: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const WINDOW: u64 = 6;
    pub const FINAL_FIT: u64 = 7;
    pub const AUDIT: u64 = 8;
    pub const MODEL: u64 = 9;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &part| splitmix64(acc ^ splitmix64(part)))
}

pub fn rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, path: &[u64]) -> StreamRng {
    rng(derive_seed(master, path))
}
