//! Seed derivation for independent, reproducible random streams.
//!
//! Every stream is keyed by the run seed plus a tuple of integers (client id,
//! round, epoch, ...), so results do not depend on the order in which client
//! computations execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep streams that share numeric keys apart.
pub mod tag {
    pub const DATA: u64 = 1;
    pub const TEST_DATA: u64 = 2;
    pub const PARTITION: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const MODEL_INIT: u64 = 5;
    pub const SAMPLER: u64 = 6;
    pub const LOCAL_TRAIN: u64 = 7;
    pub const INTERMEDIATE_TRAIN: u64 = 8;
    pub const COMPRESS: u64 = 9;
    pub const SURROGATE: u64 = 10;
    pub const INTERMEDIATE_PICK: u64 = 11;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `seed` with `parts` into a single 64-bit stream seed.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_parts_matters() {
        assert_ne!(derive(0, &[1, 2]), derive(0, &[2, 1]));
        assert_ne!(derive(0, &[1]), derive(1, &[1]));
        assert_eq!(derive(7, &[3, 4, 5]), derive(7, &[3, 4, 5]));
    }
}
