//! Seeded randomness shared by every stochastic procedure in the crate.
//!
//! The generator is fixed: xoshiro256** (Blackman & Vigna), seeded from a
//! single `u64` through SplitMix64 as implemented by `rand_xoshiro`. All
//! derived quantities are computed here from raw 64-bit outputs so the
//! sequence of floats is reproducible on any platform:
//!
//! * uniform: top 53 bits of one output, scaled by 2^-53, in `[0, 1)`;
//! * integer below `n`: high word of the 128-bit product `x * n`;
//! * Gaussian: Box–Muller over two uniforms, cosine branch only (no cached
//!   second value), so every draw consumes exactly two outputs.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: Xoshiro256StarStar,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// One step of the stream mapped to `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn gaussian(&mut self, mean: f64, stddev: f64) -> Result<f64> {
        if !(stddev > 0.0) || !stddev.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian stddev must be positive, got {stddev}"
            )));
        }
        Ok(mean + stddev * self.standard_normal())
    }

    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Independent child stream; does not advance `self`.
    pub fn fork(&self, tag: u64) -> Self {
        Self::new(derive_seed(self.seed, tag))
    }
}

/// SplitMix64 finalizer over `seed ^ tag`; used to derive per-cell and
/// per-episode seeds from a master seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fisher–Yates, last index first.
pub fn shuffle_in_place<T>(rng: &mut RngStream, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i + 1);
        items.swap(i, j);
    }
}

/// `k` distinct indices drawn uniformly from `[0, n)`, returned sorted.
pub fn sample_without_replacement(rng: &mut RngStream, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below(n - i);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}
