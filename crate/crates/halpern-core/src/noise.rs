//! Noise models for the stochastic error terms, with certified mean bounds.
//!
//! No distribution is imposed by the iteration theory; what the rate calculus
//! consumes is the certificate `mean_norm_bound(n) >= E ||xi_n||` together
//! with moduli for the summability of those bounds. Each model here ships
//! that certificate, and the tests confirm it by Monte Carlo.
//!
//! Dependence across steps is allowed. [`NoiseModel::BoundedAdversarial`]
//! draws its direction from the current trajectory when the engine provides
//! one, which exercises the no-independence part of the contract.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::math;
use crate::rng::PathRng;
use crate::schedule::ChiFn;
use crate::space::{norm, NormKind, Point};

/// Exact Rademacher sums are used up to this batch size; beyond it the
/// Gaussian limit of the standardized sample mean is drawn instead. The
/// certified bound `sigma/sqrt(s)` holds in both regimes.
const EXACT_BATCH_LIMIT: u64 = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    /// No noise.
    Zero,
    /// Isotropic Gaussian with scale calibrated so `E||xi_n|| <= k1/(n+2)^2`
    /// in the declared norm (closed-form mean norms for Euclidean and L1;
    /// the Euclidean constant upper-bounds the sup-norm mean).
    GaussianDecay { k1: f64 },
    /// Per-step norm budget `b_n` from a finite table (zero beyond it), spent
    /// adversarially: the sample points along the direction the engine
    /// supplies, with norm exactly `b_n`.
    BoundedAdversarial { bounds: Vec<f64> },
    /// Mean of `s_n` iid centered samples of scale `sigma` along the first
    /// coordinate, with `s_n = ceil(sigma^2 (n+2)^4 / k1^2)` so that
    /// `sigma/sqrt(s_n) <= k1/(n+2)^2`. The single-coordinate construction
    /// keeps the `sigma/sqrt(s)` bound valid in every supported norm.
    MinibatchSurrogate { sigma: f64, k1: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), &'static str> {
        match self {
            NoiseModel::Zero => Ok(()),
            NoiseModel::GaussianDecay { k1 } => {
                if !k1.is_finite() || *k1 < 0.0 {
                    Err("gaussian k1 must be finite and nonnegative")
                } else {
                    Ok(())
                }
            }
            NoiseModel::BoundedAdversarial { bounds } => {
                if bounds.iter().any(|b| !b.is_finite() || *b < 0.0) {
                    Err("adversarial bounds must be finite and nonnegative")
                } else {
                    Ok(())
                }
            }
            NoiseModel::MinibatchSurrogate { sigma, k1 } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    Err("minibatch sigma must be positive")
                } else if !k1.is_finite() || *k1 <= 0.0 {
                    Err("minibatch k1 must be positive")
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Certified upper bound on `E ||xi_n||`. Pure; nonincreasing in `n` for
    /// the decaying models.
    pub fn mean_norm_bound(&self, n: u64) -> f64 {
        match self {
            NoiseModel::Zero => 0.0,
            NoiseModel::GaussianDecay { k1 } => {
                let d = n as f64 + 2.0;
                k1 / (d * d)
            }
            NoiseModel::BoundedAdversarial { bounds } => {
                bounds.get(n as usize).copied().unwrap_or(0.0)
            }
            NoiseModel::MinibatchSurrogate { sigma, .. } => {
                sigma / math::sqrt(self.batch_size(n) as f64)
            }
        }
    }

    /// Minibatch size at step `n`; 1 for models without batching.
    pub fn batch_size(&self, n: u64) -> u64 {
        match self {
            NoiseModel::MinibatchSurrogate { sigma, k1 } => {
                let d = n as f64 + 2.0;
                math::ceil_index(sigma * sigma * d * d * d * d / (k1 * k1)).max(1)
            }
            _ => 1,
        }
    }

    /// Largest per-step mean bound, `sup_n mean_norm_bound(n)`.
    pub fn sup_mean_bound(&self) -> f64 {
        match self {
            NoiseModel::BoundedAdversarial { bounds } => {
                bounds.iter().fold(0.0f64, |m, b| m.max(*b))
            }
            _ => self.mean_norm_bound(0),
        }
    }

    /// Upper bound on `sum_n E ||xi_n||`. All supported models are summable
    /// by construction (the adversarial table is finitely supported).
    pub fn sum_bound(&self) -> f64 {
        match self {
            NoiseModel::Zero => 0.0,
            // telescoping domination of the tail from N=0
            NoiseModel::GaussianDecay { k1 } => *k1,
            NoiseModel::BoundedAdversarial { bounds } => {
                let mut k = math::KahanSum::new();
                for b in bounds {
                    k.add(*b);
                }
                k.value()
            }
            NoiseModel::MinibatchSurrogate { k1, .. } => *k1,
        }
    }

    /// Modulus for the bound-sequence tail: `sum_{n >= chi(eps)} bound(n) < eps`.
    pub fn sum_modulus(&self) -> ChiFn {
        match self {
            NoiseModel::Zero => Arc::new(|_| 0),
            NoiseModel::GaussianDecay { k1 } | NoiseModel::MinibatchSurrogate { k1, .. } => {
                let k1 = *k1;
                if k1 == 0.0 {
                    return Arc::new(|_| 0);
                }
                // tail from N is strictly below the telescoping k1/(N+1)
                Arc::new(move |eps: f64| math::ceil_index(k1 / eps).saturating_sub(1).max(1))
            }
            NoiseModel::BoundedAdversarial { bounds } => {
                let bounds = bounds.clone();
                Arc::new(move |eps: f64| {
                    if eps <= 0.0 {
                        return u64::MAX;
                    }
                    // smallest N with strict tail sum < eps, scanning from the end
                    let mut tail = 0.0;
                    let mut n = bounds.len() as u64;
                    while n > 0 {
                        let next = tail + bounds[n as usize - 1];
                        if next >= eps {
                            return n;
                        }
                        tail = next;
                        n -= 1;
                    }
                    0
                })
            }
        }
    }

    /// Modulus for `sum_n E ||xi_{n+1} - xi_n||`, via the triangle inequality
    /// (each term is at most twice the level bound).
    pub fn diff_sum_modulus(&self) -> ChiFn {
        let inner = self.sum_modulus();
        Arc::new(move |eps: f64| inner(eps / 2.0))
    }

    /// Upper bound companion of [`Self::diff_sum_modulus`].
    pub fn diff_sum_bound(&self) -> f64 {
        2.0 * self.sum_bound()
    }

    /// Pointwise rate: `mean_norm_bound(n) < eps` for all `n >= rate(eps)`.
    pub fn rate_to_zero(&self) -> ChiFn {
        match self {
            NoiseModel::Zero => Arc::new(|_| 0),
            NoiseModel::GaussianDecay { k1 } | NoiseModel::MinibatchSurrogate { k1, .. } => {
                let k1 = *k1;
                if k1 == 0.0 {
                    return Arc::new(|_| 0);
                }
                Arc::new(move |eps: f64| {
                    if eps <= 0.0 {
                        return u64::MAX;
                    }
                    // need (n+2)^2 > k1/eps strictly
                    math::ceil_index(math::sqrt(k1 / eps)).saturating_sub(1)
                })
            }
            NoiseModel::BoundedAdversarial { bounds } => {
                let bounds = bounds.clone();
                Arc::new(move |eps: f64| {
                    let mut from = 0u64;
                    for (n, b) in bounds.iter().enumerate() {
                        if *b >= eps {
                            from = n as u64 + 1;
                        }
                    }
                    from
                })
            }
        }
    }

    /// Draws `xi_n`. `adversary_dir`, when given, orients the adversarial
    /// model; other models ignore it. Satisfies
    /// `E ||result|| <= mean_norm_bound(n)` in the declared norm.
    pub fn sample(
        &self,
        n: u64,
        dim: usize,
        kind: NormKind,
        rng: &mut PathRng,
        adversary_dir: Option<&Point>,
    ) -> Point {
        match self {
            NoiseModel::Zero => Point::zero(dim),
            NoiseModel::GaussianDecay { k1 } => {
                if *k1 == 0.0 {
                    return Point::zero(dim);
                }
                let target = self.mean_norm_bound(n);
                let c = match kind {
                    NormKind::Euclidean | NormKind::Sup => math::gaussian_mean_norm_euclidean(dim),
                    NormKind::L1 => math::gaussian_mean_norm_l1(dim),
                };
                rng.normal_vector(dim).scale(target / c)
            }
            NoiseModel::BoundedAdversarial { .. } => {
                let b = self.mean_norm_bound(n);
                if b == 0.0 {
                    return Point::zero(dim);
                }
                let dir = match adversary_dir {
                    Some(d) if norm(kind, d) > 1e-12 => d.scale(1.0 / norm(kind, d)),
                    _ => Point::basis(dim, 0),
                };
                dir.scale(b)
            }
            NoiseModel::MinibatchSurrogate { sigma, .. } => {
                let s = self.batch_size(n);
                let mean = if s <= EXACT_BATCH_LIMIT {
                    sigma * rademacher_sum(rng, s) / s as f64
                } else {
                    // Gaussian limit: mean of s centered sigma-scale samples
                    sigma / math::sqrt(s as f64) * rng.standard_normal()
                };
                let mut coords = alloc::vec![0.0; dim];
                coords[0] = mean;
                Point::from_raw(coords)
            }
        }
    }
}

/// Sum of `s` iid signs, drawn 64 at a time via popcount.
fn rademacher_sum(rng: &mut PathRng, s: u64) -> f64 {
    let mut total: i64 = 0;
    let mut left = s;
    while left >= 64 {
        let ones = rng.next_u64().count_ones() as i64;
        total += 2 * ones - 64;
        left -= 64;
    }
    if left > 0 {
        let mask = (1u64 << left) - 1;
        let ones = (rng.next_u64() & mask).count_ones() as i64;
        total += 2 * ones - left as i64;
    }
    total as f64
}
