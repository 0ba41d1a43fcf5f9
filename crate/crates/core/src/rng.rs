//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a master seed and a fixed label, so streams are independent
//! of evaluation order and worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of a sequence of integer labels.
pub fn label_hash(labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |h, &l| mix64(h ^ mix64(l)))
}

/// `seed XOR hash(labels)`.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    seed ^ label_hash(labels)
}

pub fn stream(seed: u64, labels: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, labels))
}

pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, &[1, 2]).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let b: u64 = stream(7, &[2, 1]).random();
        assert_ne!(a[0], b);
    }
}
