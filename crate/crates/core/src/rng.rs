//! Deterministic seed derivation.
//!
//! Everything random in this crate flows from explicit `u64` seeds through
//! these helpers, so results are reproducible bit-for-bit and independent of
//! evaluation order (noise draws in particular are pure functions of the
//! seed and the frequency point, never of query history).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Bijective on u64 with good avalanche behavior.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a list of parts into one seed. Used to derive independent
/// substreams from (master seed, context tags, indices).
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Fresh deterministic generator for a derived substream.
pub fn substream(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(parts))
}

/// Uniform in [0,1) from a single mixed word (53-bit mantissa path).
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
