//! Uniform-convexity and uniform-integrability moduli.
//!
//! The convexity modulus quantifies how much the midpoint of a separated pair
//! inside a ball dips toward the center; the integrability modulus converts
//! almost-sure convergence back into convergence in mean. Both are supplied
//! as executable functions with their defining inequalities property-tested.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use crate::math;
use crate::space::{dist, norm, NormKind, Point};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryError {
    Invalid(String),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

/// Modulus of uniform convexity: `eta : (0, 2] -> (0, 1]` such that points of
/// the unit ball at distance `eps` have midpoint norm at most `1 - eta(eps)`.
#[derive(Clone)]
pub struct UcModulus {
    eta: ScalarFn,
    /// `(p, c)` when `eta(eps) = c * eps^p`.
    power_type: Option<(f64, f64)>,
    /// `eta_tilde` when `eta(eps) = eps * eta_tilde(eps)` with
    /// `eta_tilde` increasing; enables the sharpened ball estimate.
    tilde: Option<ScalarFn>,
}

impl fmt::Debug for UcModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UcModulus")
            .field("power_type", &self.power_type)
            .field("has_tilde", &self.tilde.is_some())
            .finish()
    }
}

impl UcModulus {
    pub fn new(eta: ScalarFn) -> Result<Self, GeometryError> {
        let m = Self { eta, power_type: None, tilde: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_power_type(
        eta: ScalarFn,
        p: f64,
        c: f64,
        tilde: Option<ScalarFn>,
    ) -> Result<Self, GeometryError> {
        if p < 2.0 || c <= 0.0 {
            return Err(GeometryError::Invalid(format!(
                "power type requires p >= 2 and c > 0, got p={p}, c={c}"
            )));
        }
        let m = Self { eta, power_type: Some((p, c)), tilde };
        m.validate()?;
        Ok(m)
    }

    /// Inner-product-space modulus `eta(eps) = eps^2 / 8`, of power type
    /// `(2, 1/8)`, with `eta_tilde(eps) = eps / 8`.
    pub fn inner_product() -> Self {
        Self {
            eta: Arc::new(|eps| eps * eps / 8.0),
            power_type: Some((2.0, 0.125)),
            tilde: Some(Arc::new(|eps| eps / 8.0)),
        }
    }

    pub fn eta(&self, eps: f64) -> f64 {
        (self.eta)(eps)
    }

    pub fn power_type(&self) -> Option<(f64, f64)> {
        self.power_type
    }

    pub fn has_tilde(&self) -> bool {
        self.tilde.is_some()
    }

    /// `eta_tilde(eps)` when available, else `eta(eps) / eps`.
    pub fn tilde(&self, eps: f64) -> f64 {
        match &self.tilde {
            Some(t) => t(eps),
            None => self.eta(eps) / eps,
        }
    }

    /// Grid validation on `eps = 2^-k, k=0..10` (doubling to cover (0,2]):
    /// range in (0,1], power-type consistency to 1e-12, tilde factorization.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for k in 0..=10 {
            let eps = 2.0 / (1u64 << k) as f64;
            let v = self.eta(eps);
            if !(v > 0.0 && v <= 1.0) {
                return Err(GeometryError::Invalid(format!(
                    "eta({eps}) = {v} outside (0, 1]"
                )));
            }
            if let Some((p, c)) = self.power_type {
                let expect = c * math::powf(eps, p);
                if (v - expect).abs() > 1e-12 {
                    return Err(GeometryError::Invalid(format!(
                        "power-type mismatch at {eps}: eta={v}, c*eps^p={expect}"
                    )));
                }
            }
            if let Some(t) = &self.tilde {
                if (v - eps * t(eps)).abs() > 1e-12 {
                    return Err(GeometryError::Invalid(format!(
                        "tilde factorization fails at {eps}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Checks the scaled-ball convexity estimate on one admissible triple:
/// for `x, y` in the closed ball of radius `r` around `a` with
/// `||x - y|| >= eps * r`,
///
/// `||(1-lambda) x + lambda y - a|| <= (1 - 2 lambda (1-lambda) eta(eps)) r`.
///
/// Returns `None` (inconclusive) when the preconditions fail, `Some(holds)`
/// otherwise. Euclidean norm.
pub fn ball_convexity_check(
    eta: &UcModulus,
    a: &Point,
    x: &Point,
    y: &Point,
    r: f64,
    eps: f64,
    lambda: f64,
) -> Option<bool> {
    if r <= 0.0 || !(0.0..=1.0).contains(&lambda) || !(eps > 0.0 && eps <= 2.0) {
        return None;
    }
    let dx = dist(NormKind::Euclidean, x, a).ok()?;
    let dy = dist(NormKind::Euclidean, y, a).ok()?;
    if dx > r + 1e-12 || dy > r + 1e-12 {
        return None;
    }
    if dist(NormKind::Euclidean, x, y).ok()? < eps * r {
        return None;
    }
    let mid = x.lerp(y, lambda);
    let lhs = norm(NormKind::Euclidean, &mid.sub(a));
    let rhs = (1.0 - 2.0 * lambda * (1.0 - lambda) * eta.eta(eps)) * r;
    Some(lhs <= rhs + 1e-9)
}

/// Modulus of uniform integrability: `P(A) <= mu(eps)` forces
/// `E[X_n 1_A] <= eps` uniformly in `n`.
#[derive(Clone)]
pub struct UiModulus {
    mu: ScalarFn,
    provenance: &'static str,
}

impl fmt::Debug for UiModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UiModulus").field("provenance", &self.provenance).finish()
    }
}

impl UiModulus {
    pub fn mu(&self, eps: f64) -> f64 {
        (self.mu)(eps)
    }

    pub fn provenance(&self) -> &'static str {
        self.provenance
    }

    pub fn from_fn(provenance: &'static str, mu: ScalarFn) -> Self {
        Self { mu, provenance }
    }
}

/// From a uniform p-th moment bound `E[X_n^p] <= K`, `p > 1`:
/// `mu(eps) = (eps/2) (eps/2K)^{1/(p-1)}`.
pub fn ui_from_pth_moment(k: f64, p: f64) -> Result<UiModulus, GeometryError> {
    if p <= 1.0 {
        return Err(GeometryError::Invalid(format!("p-th moment modulus needs p > 1, got {p}")));
    }
    if k <= 0.0 {
        return Err(GeometryError::Invalid(format!("moment bound must be positive, got {k}")));
    }
    Ok(UiModulus {
        mu: Arc::new(move |eps| (eps / 2.0) * math::powf(eps / (2.0 * k), 1.0 / (p - 1.0))),
        provenance: "pth-moment",
    })
}

/// From a supercoercive growth bound `E[g(X_n)] <= K` where `kappa` witnesses
/// `g(x)/x >= a` for `x >= kappa(a)`: `mu(eps) = eps / (2 kappa(2K/eps))`.
pub fn ui_from_supercoercive(k: f64, kappa: ScalarFn) -> UiModulus {
    UiModulus {
        mu: Arc::new(move |eps| eps / (2.0 * kappa(2.0 * k / eps))),
        provenance: "supercoercive",
    }
}

/// From absolute-continuity moduli of the summed error norms, for constant
/// anchor and start: `mu(eps) = min(eps/4K, mu1(eps/8), mu2(eps/8))`.
/// `None` stands for an absent (noise-free) error sum.
pub fn ui_from_error_sums(
    k: f64,
    mu1: Option<ScalarFn>,
    mu2: Option<ScalarFn>,
) -> Result<UiModulus, GeometryError> {
    if k <= 0.0 {
        return Err(GeometryError::Invalid(format!("domination constant must be positive, got {k}")));
    }
    Ok(UiModulus {
        mu: Arc::new(move |eps| {
            let mut m = eps / (4.0 * k);
            if let Some(m1) = &mu1 {
                m = m.min(m1(eps / 8.0));
            }
            if let Some(m2) = &mu2 {
                m = m.min(m2(eps / 8.0));
            }
            m
        }),
        provenance: "error-sums",
    })
}

/// Probability threshold from a mean lower bound: `E|X| >= a + eps` forces
/// `P(|X| > a) > mu(eps/2)`.
pub fn abs_continuity_lower_bound(mu: &UiModulus, eps: f64) -> f64 {
    mu.mu(eps / 2.0)
}

/// The `a = eps/2` instance: `E|X| >= eps` forces `P(|X| > eps/2) > mu(eps/4)`.
pub fn abs_continuity_special(mu: &UiModulus, eps: f64) -> f64 {
    mu.mu(eps / 4.0)
}
