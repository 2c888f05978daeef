//! Parameter sequences and their certified series moduli.
//!
//! A [`Schedule`] produces the deterministic coefficients of the iteration.
//! Beyond pointwise evaluation it certifies, where possible:
//!
//! * a divergence modulus `theta` witnessing `sum a_n = infinity` through
//!   partial sums: `sum_{n=k}^{theta(k,b)} a_n >= b`,
//! * a variation modulus `chi` with `sum_{n >= chi(eps)} |a_{n+1} - a_n| < eps`
//!   together with an upper bound on the total variation,
//! * a pointwise rate `rho` with `a_n < eps` for all `n >= rho(eps)`.
//!
//! These certificates are the inputs the rate calculus consumes.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Divergence modulus: `(k, b) -> index`. Accepts real (possibly negative) `b`.
pub type ThetaFn = Arc<dyn Fn(u64, f64) -> u64 + Send + Sync>;
/// Convergence-style modulus: `eps -> index`.
pub type ChiFn = Arc<dyn Fn(f64) -> u64 + Send + Sync>;

/// Deterministic coefficient sequence with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// `a_n = 2 / (n + 2)`; the anchored fast-rate choice (`a_0 = 1`).
    HalpernTwo,
    /// `a_n = c`.
    Constant(f64),
    /// `a_n = scale / (n + 1)^exponent`.
    PowerDecay { scale: f64, exponent: f64 },
    /// Tabulated prefix, optionally continued by a tail rule evaluated at the
    /// same absolute index `n`.
    Custom {
        prefix: Vec<f64>,
        tail: Option<Box<Schedule>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleError {
    /// The series over the schedule does not diverge (or no certificate exists).
    NotDivergent,
    /// The requested modulus is not available for this schedule shape.
    Unsupported(&'static str),
    /// Variation certificates require a monotone schedule.
    NonMonotone,
    /// Custom schedule evaluated beyond its prefix without a tail rule.
    PrefixExhausted { n: u64 },
    /// Parameter out of range.
    Invalid(String),
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::NotDivergent => write!(f, "series not divergent"),
            ScheduleError::Unsupported(what) => write!(f, "modulus unsupported: {what}"),
            ScheduleError::NonMonotone => write!(f, "schedule not monotone"),
            ScheduleError::PrefixExhausted { n } => {
                write!(f, "custom schedule has no value at n={n} (prefix exhausted, no tail rule)")
            }
            ScheduleError::Invalid(msg) => write!(f, "invalid schedule: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScheduleError {}

impl Schedule {
    /// Checks parameter ranges (all values must lie in `[0, 1]`).
    pub fn validate(&self) -> Result<(), ScheduleError> {
        match self {
            Schedule::HalpernTwo => Ok(()),
            Schedule::Constant(c) => {
                if !(0.0..=1.0).contains(c) {
                    return Err(ScheduleError::Invalid(format!("constant {c} not in [0,1]")));
                }
                Ok(())
            }
            Schedule::PowerDecay { scale, exponent } => {
                if !(0.0..=1.0).contains(scale) {
                    return Err(ScheduleError::Invalid(format!("scale {scale} not in [0,1]")));
                }
                if !exponent.is_finite() || *exponent < 0.0 {
                    return Err(ScheduleError::Invalid(format!("exponent {exponent} invalid")));
                }
                Ok(())
            }
            Schedule::Custom { prefix, tail } => {
                if let Some(bad) = prefix.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(ScheduleError::Invalid(format!("prefix value {bad} not in [0,1]")));
                }
                if let Some(t) = tail {
                    t.validate()?;
                }
                Ok(())
            }
        }
    }

    /// `a_n`. Pure and deterministic.
    pub fn value(&self, n: u64) -> Result<f64, ScheduleError> {
        match self {
            Schedule::HalpernTwo => Ok(2.0 / (n as f64 + 2.0)),
            Schedule::Constant(c) => Ok(*c),
            Schedule::PowerDecay { scale, exponent } => {
                Ok(scale / math::powf(n as f64 + 1.0, *exponent))
            }
            Schedule::Custom { prefix, tail } => {
                if (n as usize) < prefix.len() {
                    Ok(prefix[n as usize])
                } else if let Some(t) = tail {
                    t.value(n)
                } else {
                    Err(ScheduleError::PrefixExhausted { n })
                }
            }
        }
    }

    /// Divergence modulus `theta` with `sum_{n=k}^{theta(k,b)} a_n >= b` and
    /// `theta(k,b) >= k`. Only available where a closed form is certified.
    pub fn divergence_modulus(&self) -> Result<ThetaFn, ScheduleError> {
        match self {
            Schedule::HalpernTwo => Ok(Arc::new(|k: u64, b: f64| {
                // partial sums dominate 2*ln((m+3)/(k+2))
                let target = (k as f64 + 2.0) * math::exp(b / 2.0);
                math::ceil_index(target).max(k)
            })),
            Schedule::Constant(c) => {
                if *c > 0.0 {
                    let c = *c;
                    Ok(Arc::new(move |k: u64, b: f64| {
                        k.saturating_add(math::ceil_index(b / c))
                    }))
                } else {
                    Err(ScheduleError::NotDivergent)
                }
            }
            Schedule::PowerDecay { .. } | Schedule::Custom { .. } => {
                Err(ScheduleError::Unsupported("divergence modulus"))
            }
        }
    }

    /// True when `a_{n+1} <= a_n` for all n (structurally, not by sampling).
    pub fn is_nonincreasing(&self) -> bool {
        match self {
            Schedule::HalpernTwo | Schedule::Constant(_) => true,
            Schedule::PowerDecay { .. } => true,
            Schedule::Custom { prefix, tail } => {
                let prefix_ok = prefix.windows(2).all(|w| w[1] <= w[0]);
                match tail {
                    None => prefix_ok,
                    Some(t) => {
                        let junction_ok = match (prefix.last(), t.value(prefix.len() as u64)) {
                            (Some(last), Ok(next)) => next <= *last,
                            (None, _) => true,
                            (_, Err(_)) => false,
                        };
                        prefix_ok && junction_ok && t.is_nonincreasing()
                    }
                }
            }
        }
    }

    /// Limit of the schedule, where defined (nonincreasing schedules only).
    fn limit(&self) -> Option<f64> {
        match self {
            Schedule::HalpernTwo => Some(0.0),
            Schedule::Constant(c) => Some(*c),
            Schedule::PowerDecay { scale, exponent } => {
                if *exponent > 0.0 {
                    Some(0.0)
                } else {
                    Some(*scale)
                }
            }
            Schedule::Custom { prefix, tail } => match tail {
                Some(t) => t.limit(),
                None => prefix.last().copied(),
            },
        }
    }

    /// Variation modulus for `sum |a_{n+1} - a_n|` on monotone schedules:
    /// returns `(chi, total_variation_bound)` with
    /// `sum_{n >= chi(eps)} |a_{n+1} - a_n| < eps`.
    pub fn variation_modulus(&self) -> Result<(ChiFn, f64), ScheduleError> {
        if !self.is_nonincreasing() {
            return Err(ScheduleError::NonMonotone);
        }
        let limit = self.limit().ok_or(ScheduleError::Unsupported("variation modulus"))?;
        match self {
            Schedule::HalpernTwo => {
                // tail variation from N telescopes to exactly 2/(N+2); strict
                // inequality needs N+2 > 2/eps, hence ceil(2/eps)-1.
                let chi: ChiFn = Arc::new(|eps: f64| math::ceil_index(2.0 / eps).saturating_sub(1));
                Ok((chi, 1.0))
            }
            Schedule::Constant(_) => Ok((Arc::new(|_| 0), 0.0)),
            Schedule::PowerDecay { scale, exponent } => {
                let total = self.value(0).unwrap_or(*scale) - limit;
                if *exponent == 0.0 || *scale == 0.0 {
                    return Ok((Arc::new(|_| 0), 0.0));
                }
                let scale = *scale;
                let exponent = *exponent;
                // tail variation from N telescopes to a_N; want a_N < eps
                let chi: ChiFn = Arc::new(move |eps: f64| {
                    if eps <= 0.0 {
                        return u64::MAX;
                    }
                    let x = math::powf(scale / eps, 1.0 / exponent);
                    if x.is_nan() {
                        return u64::MAX;
                    }
                    // N+1 > (scale/eps)^{1/exponent} strictly
                    if x <= 0.0 {
                        0
                    } else {
                        math::floor(x) as u64
                    }
                });
                Ok((chi, total))
            }
            Schedule::Custom { prefix, tail } => {
                // Monotone, so tail variation from N is a_N - limit; scan the
                // prefix and defer to the tail rule beyond it.
                let this = self.clone();
                let prefix_len = prefix.len() as u64;
                let total = self.value(0).map(|a0| a0 - limit).unwrap_or(0.0);
                let tail_chi = match tail {
                    Some(t) => Some(t.variation_modulus()?.0),
                    None => None,
                };
                let chi: ChiFn = Arc::new(move |eps: f64| {
                    for n in 0..prefix_len {
                        if this.value(n).map(|v| v - limit < eps).unwrap_or(false) {
                            return n;
                        }
                    }
                    match &tail_chi {
                        Some(tc) => tc(eps).max(prefix_len),
                        None => prefix_len,
                    }
                });
                Ok((chi, total))
            }
        }
    }

    /// Pointwise rate to zero: `a_n < eps` for all `n >= rho(eps)`.
    /// `None` when the schedule does not converge to zero.
    pub fn rate_to_zero(&self) -> Option<ChiFn> {
        match self {
            Schedule::HalpernTwo => Some(Arc::new(|eps: f64| math::ceil_index(2.0 / eps))),
            Schedule::Constant(c) => {
                if *c == 0.0 {
                    Some(Arc::new(|_| 0))
                } else {
                    None
                }
            }
            Schedule::PowerDecay { scale, exponent } => {
                if *scale == 0.0 {
                    return Some(Arc::new(|_| 0));
                }
                if *exponent <= 0.0 {
                    return None;
                }
                let scale = *scale;
                let exponent = *exponent;
                Some(Arc::new(move |eps: f64| {
                    if eps <= 0.0 {
                        return u64::MAX;
                    }
                    let x = math::powf(scale / eps, 1.0 / exponent);
                    if x.is_nan() {
                        u64::MAX
                    } else if x <= 0.0 {
                        0
                    } else {
                        math::floor(x) as u64
                    }
                }))
            }
            Schedule::Custom { prefix, tail } => {
                let tail_rate = tail.as_ref().and_then(|t| t.rate_to_zero())?;
                let this = self.clone();
                let prefix_len = prefix.len() as u64;
                Some(Arc::new(move |eps: f64| {
                    let mut from = tail_rate(eps).max(prefix_len);
                    // ensure no prefix entry at or past the returned index violates
                    for n in (0..prefix_len).rev() {
                        if this.value(n).map(|v| v >= eps).unwrap_or(true) {
                            from = from.max(n + 1);
                            break;
                        }
                    }
                    from
                }))
            }
        }
    }

    /// Constant band `(lo, hi)` with `lo <= a_n <= hi`, for schedules bounded
    /// away from 0 and 1. Used to certify the averaging band `Lambda`.
    pub fn band(&self) -> Option<(f64, f64)> {
        match self {
            Schedule::Constant(c) => Some((*c, *c)),
            Schedule::PowerDecay { scale, exponent } if *exponent == 0.0 => {
                Some((*scale, *scale))
            }
            _ => None,
        }
    }
}

/// Bundle of the series certificates a schedule can offer.
pub struct SeriesModuli {
    pub theta: Option<ThetaFn>,
    pub chi_variation: Option<ChiFn>,
    pub variation_bound: Option<f64>,
    pub rho_to_zero: Option<ChiFn>,
}

/// Gathers every certificate the schedule supports; absent ones stay `None`.
pub fn series_moduli(s: &Schedule) -> SeriesModuli {
    let (chi_variation, variation_bound) = match s.variation_modulus() {
        Ok((chi, b)) => (Some(chi), Some(b)),
        Err(_) => (None, None),
    };
    SeriesModuli {
        theta: s.divergence_modulus().ok(),
        chi_variation,
        variation_bound,
        rho_to_zero: s.rate_to_zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exact rational with i128 components, for partial-sum oracles at small sizes.
    #[derive(Clone, Copy, Debug)]
    struct Ratio {
        num: i128,
        den: i128,
    }

    impl Ratio {
        fn new(num: i128, den: i128) -> Self {
            let g = gcd(num.abs(), den.abs()).max(1);
            Ratio { num: num / g, den: den / g }
        }
        fn add(self, other: Ratio) -> Ratio {
            Ratio::new(
                self.num.checked_mul(other.den).unwrap() + other.num.checked_mul(self.den).unwrap(),
                self.den.checked_mul(other.den).unwrap(),
            )
        }
        fn ge_int_times(self, b: f64) -> bool {
            self.num as f64 / self.den as f64 >= b
        }
    }

    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 { a } else { gcd(b, a % b) }
    }

    #[test]
    fn values_match_closed_forms() {
        let h = Schedule::HalpernTwo;
        assert_eq!(h.value(0).unwrap(), 1.0);
        assert_eq!(h.value(2).unwrap(), 0.5);
        let c = Schedule::Constant(0.5);
        assert_eq!(c.value(0).unwrap(), 0.5);
        assert_eq!(c.value(12345).unwrap(), 0.5);
    }

    #[test]
    fn custom_prefix_and_tail() {
        let s = Schedule::Custom {
            prefix: alloc::vec![1.0, 0.75],
            tail: Some(Box::new(Schedule::HalpernTwo)),
        };
        assert_eq!(s.value(1).unwrap(), 0.75);
        assert_eq!(s.value(2).unwrap(), 0.5); // tail rule at absolute index
        let bare = Schedule::Custom { prefix: alloc::vec![0.5], tail: None };
        assert!(matches!(bare.value(3), Err(ScheduleError::PrefixExhausted { n: 3 })));
    }

    #[test]
    fn halpern_divergence_modulus_certified_by_exact_partial_sums() {
        let theta = Schedule::HalpernTwo.divergence_modulus().unwrap();
        // exact rational partial sums for small (k, b); i128 stays comfortably
        // inside range for b <= 3
        for k in [0u64, 1, 2, 5, 10] {
            for b in [0.5f64, 1.0, 2.0, 3.0] {
                let m = theta(k, b);
                assert!(m >= k);
                let mut sum = Ratio::new(0, 1);
                for n in k..=m {
                    sum = sum.add(Ratio::new(2, n as i128 + 2));
                }
                assert!(sum.ge_int_times(b), "theta({k},{b})={m}, sum too small");
            }
        }
        // larger inputs: float partial sums with headroom
        for k in [0u64, 7, 50] {
            for b in [5.0f64, 10.0] {
                let m = theta(k, b);
                let mut sum = 0.0;
                for n in k..=m {
                    sum += 2.0 / (n as f64 + 2.0);
                }
                assert!(sum >= b - 1e-9, "theta({k},{b})={m}, sum={sum}");
            }
        }
        // empty requirement at b = 0
        assert!(theta(0, 0.0) < u64::MAX);
    }

    #[test]
    fn constant_divergence_modulus() {
        let theta = Schedule::Constant(0.25).divergence_modulus().unwrap();
        for (k, b) in [(0u64, 1.0f64), (3, 2.0), (10, 0.1)] {
            let m = theta(k, b);
            assert!(m >= k);
            let sum = 0.25 * (m - k + 1) as f64;
            assert!(sum >= b);
        }
        assert!(matches!(
            Schedule::Constant(0.0).divergence_modulus(),
            Err(ScheduleError::NotDivergent)
        ));
        assert!(matches!(
            Schedule::PowerDecay { scale: 0.5, exponent: 0.5 }.divergence_modulus(),
            Err(ScheduleError::Unsupported(_))
        ));
    }

    /// Oracle: exact tail of the variation series for HalpernTwo from N is 2/(N+2).
    fn halpern_variation_tail(from: u64) -> f64 {
        2.0 / (from as f64 + 2.0)
    }

    #[test]
    fn halpern_variation_modulus_against_exact_tail() {
        let (chi, total) = Schedule::HalpernTwo.variation_modulus().unwrap();
        assert_eq!(total, 1.0);
        // first increments: a_0 - a_1 = 1 - 2/3 = 1/3
        let a0 = Schedule::HalpernTwo.value(0).unwrap();
        let a1 = Schedule::HalpernTwo.value(1).unwrap();
        assert!((a0 - a1 - 1.0 / 3.0).abs() < 1e-15);
        for eps in [1.0f64, 0.1, 0.01, 2.0, 0.333] {
            let n = chi(eps);
            assert!(
                halpern_variation_tail(n) < eps,
                "chi({eps})={n}, tail={}",
                halpern_variation_tail(n)
            );
            // sharpness where 2/eps is integral: one index earlier fails the
            // strict bound (the modulus may overshoot by one elsewhere)
            if n > 0 && (2.0 / eps).fract() == 0.0 {
                assert!(halpern_variation_tail(n - 1) >= eps);
            }
        }
        let (chi_c, total_c) = Schedule::Constant(0.7).variation_modulus().unwrap();
        assert_eq!(total_c, 0.0);
        assert_eq!(chi_c(0.5), 0);
    }

    #[test]
    fn rate_to_zero_is_sound_and_sharp_for_halpern() {
        let rho = Schedule::HalpernTwo.rate_to_zero().unwrap();
        for eps in [1.0f64, 0.5, 0.2, 0.01] {
            let n = rho(eps);
            assert!(Schedule::HalpernTwo.value(n).unwrap() < eps);
        }
        assert!(Schedule::Constant(0.5).rate_to_zero().is_none());
    }

    #[test]
    fn band_on_constants_only() {
        assert_eq!(Schedule::Constant(0.5).band(), Some((0.5, 0.5)));
        assert_eq!(Schedule::HalpernTwo.band(), None);
    }

    proptest! {
        #[test]
        fn values_stay_in_unit_interval(n in 0u64..10_000) {
            for s in [
                Schedule::HalpernTwo,
                Schedule::Constant(0.3),
                Schedule::PowerDecay { scale: 0.9, exponent: 0.7 },
            ] {
                let v = s.value(n).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn theta_dominates_k(k in 0u64..1000, b in 0.01f64..8.0) {
            for s in [Schedule::HalpernTwo, Schedule::Constant(0.2)] {
                let theta = s.divergence_modulus().unwrap();
                prop_assert!(theta(k, b) >= k);
            }
        }

        #[test]
        fn power_decay_variation_tail_sound(eps in 0.01f64..2.0) {
            let s = Schedule::PowerDecay { scale: 0.8, exponent: 1.3 };
            let (chi, _) = s.variation_modulus().unwrap();
            let n = chi(eps);
            // tail variation telescopes to a_n for monotone-to-zero schedules
            prop_assert!(s.value(n).unwrap() < eps);
        }
    }
}
