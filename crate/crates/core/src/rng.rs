//! Seeded random stream shared by the evaluation protocol and the motion
//! generator. SplitMix64 is fully specified by its published constants, so
//! any implementation can reproduce a run from its seed.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone)]
pub struct SeededStream {
    inner: SplitMix64,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n` by multiply-high reduction.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Normal sample with the given standard deviation; zero sigma draws
    /// nothing from the stream.
    pub fn gaussian(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut self.inner);
        z * sigma
    }

    /// Chooses `k` distinct indices from `0..n` with a partial
    /// Fisher-Yates shuffle; the order of the result is the draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} from {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
