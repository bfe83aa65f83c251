//! Seeded pseudo-random source shared by environment sampling and generators.
//!
//! Every run owns exactly one [`RunRng`]. The generator is PCG-XSL-RR 128/64
//! (`rand_pcg::Pcg64`), seeded through `SeedableRng::seed_from_u64`, so a
//! `(seed, call sequence)` pair yields the same stream on every platform.

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

#[derive(Debug, Clone)]
pub struct RunRng {
    inner: Pcg64,
}

impl RunRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            inner: Pcg64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` built from the top 53 bits of one output word.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // multiply-shift reduction; bias is below n / 2^64
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Inverse-CDF lookup: first index whose cumulative mass exceeds `u`.
///
/// `cdf` must be nondecreasing and end at exactly `1.0`; `u` in `[0, 1)`.
pub fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    let idx = cdf.partition_point(|&c| c <= u);
    idx.min(cdf.len() - 1)
}
