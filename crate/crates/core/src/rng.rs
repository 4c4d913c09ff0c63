//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 stream keyed by a master seed and
//! a stream id, so independent cells (dataset records, training restarts,
//! experiment stages) can run in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream for one (class, repetition) measurement cell.
pub fn cell_stream(seed: u64, class: u8, rep: usize) -> StreamRng {
    stream(seed, (u64::from(class) << 32) | rep as u64)
}

/// SplitMix64 finaliser over `seed ^ tag`, used to give each pipeline stage its own seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
