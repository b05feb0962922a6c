//! Seeded random number generation.
//!
//! Every randomized routine in the crate takes an explicit [`Rng`]. Independent
//! streams (per coordinate, per benchmark task) are derived from a base seed and
//! an index so that parallel and sequential execution agree bit for bit.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

const STREAM_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Seed of the `index`-th substream of `seed`.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(STREAM_MIX);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, index: u64) -> Rng {
    rng_from_seed(substream_seed(seed, index))
}
