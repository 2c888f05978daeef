//! Scalar math shims and small numeric helpers.
//!
//! All transcendental functions route through `libm` when the crate is built
//! without `std`, so the core stays `no_std`-compatible while producing the
//! same values in both configurations on a given target.

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.ln()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::log(x)
    }
}

/// Exponential.
#[inline]
pub fn exp(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.exp()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::exp(x)
    }
}

/// Square root.
#[inline]
pub fn sqrt(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.sqrt()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::sqrt(x)
    }
}

/// `x` raised to the real power `y`.
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powf(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::pow(x, y)
    }
}

/// Log-gamma, used to evaluate mean norms of Gaussian vectors without overflow.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    // libm's lgamma_r returns (value, sign); the sign is always +1 for x > 0.
    libm::lgamma_r(x).0
}

/// Ceiling.
#[inline]
pub fn ceil(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.ceil()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::ceil(x)
    }
}

/// Floor.
#[inline]
pub fn floor(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.floor()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::floor(x)
    }
}

/// Smallest integer index `n >= 0` with `n >= x`, saturating at `u64::MAX`.
///
/// Rate formulas are real-valued compositions; taking the ceiling preserves
/// their defining property. Non-finite input maps to `u64::MAX`, which the
/// verifiers treat as "beyond any horizon".
#[inline]
pub fn ceil_index(x: f64) -> u64 {
    if x.is_nan() {
        return u64::MAX;
    }
    if x <= 0.0 {
        return 0;
    }
    // f64 -> u64 casts saturate.
    ceil(x) as u64
}

/// Compensated (Kahan) running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Mean norm of a d-dimensional standard Gaussian vector, `E ||Z||_2`.
///
/// Equals `sqrt(2) * Gamma((d+1)/2) / Gamma(d/2)`; evaluated via log-gamma so
/// large dimensions do not overflow.
pub fn gaussian_mean_norm_euclidean(dim: usize) -> f64 {
    let d = dim as f64;
    sqrt(2.0) * exp(ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0))
}

/// Mean L1 norm of a d-dimensional standard Gaussian vector: `d * sqrt(2/pi)`.
pub fn gaussian_mean_norm_l1(dim: usize) -> f64 {
    dim as f64 * sqrt(2.0 / core::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_index_saturates_and_clamps() {
        assert_eq!(ceil_index(-3.0), 0);
        assert_eq!(ceil_index(0.0), 0);
        assert_eq!(ceil_index(0.1), 1);
        assert_eq!(ceil_index(5.0), 5);
        assert_eq!(ceil_index(5.2), 6);
        assert_eq!(ceil_index(f64::INFINITY), u64::MAX);
        assert_eq!(ceil_index(f64::NAN), u64::MAX);
        // beyond u64 range: saturate
        assert_eq!(ceil_index(1e30), u64::MAX);
    }

    #[test]
    fn gaussian_mean_norms_match_known_values() {
        // d=1: E|Z| = sqrt(2/pi); d=2: Rayleigh mean sqrt(pi/2); d=3: 2*sqrt(2/pi).
        let s2pi = sqrt(2.0 / core::f64::consts::PI);
        assert!((gaussian_mean_norm_euclidean(1) - s2pi).abs() < 1e-12);
        assert!((gaussian_mean_norm_euclidean(2) - sqrt(core::f64::consts::PI / 2.0)).abs() < 1e-12);
        assert!((gaussian_mean_norm_euclidean(3) - 2.0 * s2pi).abs() < 1e-12);
        assert!((gaussian_mean_norm_l1(3) - 3.0 * s2pi).abs() < 1e-12);
    }

    #[test]
    fn kahan_sum_is_exact_on_adversarial_sequence() {
        let mut k = KahanSum::new();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }
}
