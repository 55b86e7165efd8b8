//! Seed derivation. Every random stream is a ChaCha8 generator keyed by
//! (master seed, index, purpose), so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CODE: u64 = 1;
pub const INFO: u64 = 2;
pub const NOISE: u64 = 3;
pub const POPULATION: u64 = 4;
pub const DEVIATION: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64, purpose: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ index) ^ purpose.rotate_left(32))
}

pub fn stream(master: u64, index: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index, purpose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn derived_seeds_are_distinct() {
        let mut seen = HashSet::new();
        for index in 0..200 {
            for purpose in [CODE, INFO, NOISE, POPULATION, DEVIATION] {
                assert!(seen.insert(derive_seed(7, index, purpose)));
            }
        }
        assert_ne!(derive_seed(1, 0, CODE), derive_seed(2, 0, CODE));
    }
}
