//! Deterministic sub-seed derivation.
//!
//! Every random draw in the crate goes through a `ChaCha8Rng` whose seed is
//! derived from the run seed and a short path of tags (round, client, step,
//! ...). Derivation is a SplitMix64 finalizer folded over the path, so the
//! stream for a given path never depends on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all seeded draws.
pub type Rng = ChaCha8Rng;

/// Stable tags for the independent random streams of a run.
pub mod tag {
    pub const PARTITION: u64 = 0x5041_5254;
    pub const ASSIGN: u64 = 0x4153_5347;
    pub const INIT: u64 = 0x494e_4954;
    pub const TRAIN: u64 = 0x5452_4e00;
    pub const EVAL: u64 = 0x4556_414c;
    pub const LOCAL_EVAL: u64 = 0x4c45_564c;
    pub const SUBSAMPLE: u64 = 0x5355_4253;
    pub const BATCH: u64 = 0x4241_5443;
    pub const SPSA: u64 = 0x5350_5341;
    pub const SHOTS: u64 = 0x5348_4f54;
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a path of tags into a base seed.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(base: u64, path: &[u64]) -> Rng {
    rng(derive(base, path))
}
