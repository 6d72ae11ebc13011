//! Seeded random streams.
//!
//! Every stochastic piece of the pipeline (initialization, sampling, noise)
//! draws from a ChaCha stream created from an explicit `u64` seed, so any
//! artifact can be regenerated bit-exactly from its recorded seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream under the same seed (initialization vs shuffling etc.).
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform draw in `[lo, hi)`.
#[inline]
pub fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Standard normal via Box–Muller. Two uniforms per draw, no caching, so the
/// stream position is a simple function of the draw count.
#[inline]
pub fn standard_normal(rng: &mut SeededRng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1], keeps the log finite
    let u2: f64 = rng.gen();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * core::f64::consts::PI * u2)
}

/// Fisher–Yates shuffle of index order `0..n`.
pub fn shuffled_indices(rng: &mut SeededRng, n: usize) -> alloc::vec::Vec<usize> {
    let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
