//! Seeded randomness with a pinned algorithm.
//!
//! Every random draw in the crate goes through [`SeededRng`]: the 64-bit seed
//! is expanded with SplitMix64 (increment `0x9E3779B97F4A7C15`, mixers
//! `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`) into the 256-bit state of
//! xoshiro256++. Bounded integers use Lemire's multiply-shift with rejection
//! and shuffles are Fisher–Yates from the back, so index selections are
//! reproducible by any implementation of those three published algorithms.

use alloc::vec::Vec;

use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Derives an independent stream for a labeled sub-task.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Self::new(splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5EED))))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound` (Lemire 2019, unbiased).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform float in `[0, 1)` from the top 53 bits.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `amount` distinct values from `0..len`, in draw order.
    ///
    /// Partial Fisher–Yates over an explicit index vector when that is small,
    /// otherwise rejection against a sorted set of already drawn values.
    pub fn sample_indices(&mut self, len: u64, amount: u64) -> Vec<u64> {
        assert!(amount <= len, "cannot draw {amount} of {len} without replacement");
        if len <= 4 * amount || len <= 1024 {
            let mut pool: Vec<u64> = (0..len).collect();
            for i in 0..amount as usize {
                let j = i + self.below(len - i as u64) as usize;
                pool.swap(i, j);
            }
            pool.truncate(amount as usize);
            pool
        } else {
            let mut seen = alloc::collections::BTreeSet::new();
            let mut out = Vec::with_capacity(amount as usize);
            while (out.len() as u64) < amount {
                let v = self.below(len);
                if seen.insert(v) {
                    out.push(v);
                }
            }
            out
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
