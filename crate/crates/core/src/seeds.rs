//! Stable seed derivation.
//!
//! Each independent work unit (a prediction set, a bootstrap replicate, a
//! simulated round) gets its own RNG stream keyed by its identity, never by
//! the order in which a scheduler happens to reach it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`. Order of `parts` matters.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// FNV-1a, used to turn record identifiers into seed parts.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Purpose tags so two consumers of the same record never share a stream.
pub mod tag {
    pub const RATES: u64 = 1;
    pub const POSTERIOR_SOCIAL: u64 = 2;
    pub const POSTERIOR_PRICE: u64 = 3;
    pub const DIP_NULL: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const SIM_PATH: u64 = 6;
    pub const SIM_AGENTS: u64 = 7;
}
