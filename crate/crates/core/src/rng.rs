//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha stream keyed by a base seed and
//! a stream index, so per-sample and per-tree work can run in any order and
//! still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream `index` derived from `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let key = mix64(seed ^ mix64(index.wrapping_add(0xA076_1D64_78BD_642F)));
    ChaCha8Rng::seed_from_u64(key)
}

/// Two-level stream, e.g. (seed, purpose, sample).
pub fn substream(seed: u64, domain: u64, index: u64) -> StreamRng {
    stream(mix64(seed ^ mix64(domain)), index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, 0).random();
        let b: u64 = stream(7, 0).random();
        let c: u64 = stream(7, 1).random();
        let d: u64 = stream(8, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
