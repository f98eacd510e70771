//! Seed plumbing. Every random choice in the crate is drawn from a
//! [`ChaCha8Rng`] so results are identical across platforms and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One round of splitmix64.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for the `counter`-th stream under `master`.
pub fn derive(master: u64, counter: u64) -> u64 {
    mix(mix(master) ^ counter.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Folds a sequence of words into a single seed.
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x243f_6a88_85a3_08d3, |acc, &w| mix(acc ^ w))
}
