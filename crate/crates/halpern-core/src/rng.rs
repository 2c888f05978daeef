//! Deterministic random streams.
//!
//! Every stochastic component consumes an explicit [`PathRng`]; streams are
//! never shared between concurrently simulated paths. Path `i` of an ensemble
//! draws from seed `master_seed ^ i`, which makes reports reproducible
//! regardless of execution order or thread count.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;
use crate::space::Point;

/// Counter-based stream for one sample path.
#[derive(Clone, Debug)]
pub struct PathRng {
    inner: ChaCha8Rng,
    cached_normal: Option<f64>,
}

/// Seed for ensemble path `i` under `master_seed`.
#[inline]
pub fn path_seed(master_seed: u64, path: u64) -> u64 {
    master_seed ^ path
}

impl PathRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            cached_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)` by rejection-free scaling (n is tiny here).
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let u = self.uniform();
        let i = (u * n as f64) as usize;
        i.min(n - 1)
    }

    /// Standard normal via Box-Muller, caching the second variate.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0,1] to keep ln finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        let (s, c) = libm::sincos(theta);
        self.cached_normal = Some(r * s);
        r * c
    }

    /// Vector of iid standard normals.
    pub fn normal_vector(&mut self, dim: usize) -> Point {
        let coords: Vec<f64> = (0..dim).map(|_| self.standard_normal()).collect();
        Point::from_raw(coords)
    }

    /// Point with iid uniform coordinates in `[-radius, radius]`.
    pub fn uniform_point(&mut self, dim: usize, radius: f64) -> Point {
        let coords: Vec<f64> = (0..dim).map(|_| self.uniform_in(-radius, radius)).collect();
        Point::from_raw(coords)
    }

    /// Rademacher sign.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.inner.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Draw from a categorical distribution given by `probs` (assumed to sum to 1).
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = PathRng::seed_from_u64(7);
        let mut b = PathRng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut rng = PathRng::seed_from_u64(42);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = rng.standard_normal();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn categorical_respects_weights() {
        let mut rng = PathRng::seed_from_u64(3);
        let probs = [0.2, 0.5, 0.3];
        let mut counts = [0usize; 3];
        for _ in 0..50_000 {
            counts[rng.categorical(&probs)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            let freq = *c as f64 / 50_000.0;
            assert!((freq - p).abs() < 0.01, "freq {freq} vs {p}");
        }
    }
}
