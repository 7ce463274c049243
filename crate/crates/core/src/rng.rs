//! Seeded random streams.
//!
//! Every random choice in the crate goes through [`Xoshiro256PlusPlus`]
//! seeded via SplitMix64. Independent consumers (initialization, negative
//! sampling, per-user test negatives, attacker splits) draw from separate
//! streams derived from `(seed, stream id)`, so adding draws to one consumer
//! never shifts another.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

/// Stream ids for the independent consumers of a run seed.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const TRAIN_SAMPLING: u64 = 2;
    pub const TEST_NEGATIVES: u64 = 3;
    pub const PAIRING: u64 = 4;
    pub const ADVERSARY: u64 = 5;
    pub const ATTACK_SPLIT: u64 = 6;
    pub const ATTACKER: u64 = 7;
    pub const SYNTHETIC: u64 = 8;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Generator for a sub-stream, e.g. one per user.
pub fn substream_rng(seed: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index))
}
