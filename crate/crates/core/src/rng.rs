//! Counter-style keyed random streams.
//!
//! Every random draw in the crate comes from a generator seeded by a tuple of
//! integers (run seed, purpose tag, and whatever identifies the draw site), so
//! results never depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_DEFECTS: u64 = 0x01;
pub(crate) const TAG_OPTIMIZER: u64 = 0x02;
pub(crate) const TAG_OPTIONS: u64 = 0x03;
pub(crate) const TAG_SEED: u64 = 0x04;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(keys: &[u64]) -> u64 {
    keys.iter().fold(0x5EED_5EED_5EED_5EED, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(keys))
}
