//! Finite-dimensional ambient space with a runtime-selectable norm.
//!
//! Iterates, anchors and noise all live in `R^d` represented as [`Point`].
//! The norm is chosen per experiment via [`NormKind`]; geometry-dependent
//! constructions elsewhere in the crate are gated on the Euclidean choice.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Element of `R^d`. Immutable after construction; all entries finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

/// Which norm the experiment runs under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Euclidean,
    Sup,
    L1,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Euclidean => write!(f, "euclidean"),
            NormKind::Sup => write!(f, "sup"),
            NormKind::L1 => write!(f, "l1"),
        }
    }
}

/// Errors from space-level operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpaceError {
    /// Dimensions of two points (or a point and its context space) disagree.
    DimMismatch { expected: usize, got: usize },
    /// A coordinate was NaN or infinite.
    NonFinite,
    /// Zero-dimensional point.
    EmptyPoint,
}

impl fmt::Display for SpaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceError::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            SpaceError::NonFinite => write!(f, "non-finite coordinate"),
            SpaceError::EmptyPoint => write!(f, "point must have at least one coordinate"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SpaceError {}

impl Point {
    /// Builds a point, rejecting NaN/Inf entries and zero dimension.
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.is_empty() {
            return Err(SpaceError::EmptyPoint);
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(SpaceError::NonFinite);
        }
        Ok(Self { coords })
    }

    /// Origin of `R^d`.
    pub fn zero(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    /// `i`-th standard basis vector of `R^d`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut coords = vec![0.0; dim];
        coords[i] = 1.0;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// `self + other`.
    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `c * self`.
    pub fn scale(&self, c: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|a| c * a).collect(),
        }
    }

    /// Convex-style combination `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        }
    }

    /// Euclidean inner product.
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Construction from raw coordinates without the finiteness check.
    /// Internal fast path for arithmetic results that are checked downstream.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// Norm of `v` under `kind`. Zero iff `v` is the zero vector.
pub fn norm(kind: NormKind, v: &Point) -> f64 {
    match kind {
        NormKind::Euclidean => math::sqrt(v.coords.iter().map(|c| c * c).sum()),
        NormKind::Sup => v.coords.iter().fold(0.0f64, |m, c| m.max(c.abs())),
        NormKind::L1 => v.coords.iter().map(|c| c.abs()).sum(),
    }
}

/// Distance `||a - b||` under `kind`; errors on dimension mismatch.
pub fn dist(kind: NormKind, a: &Point, b: &Point) -> Result<f64, SpaceError> {
    if a.dim() != b.dim() {
        return Err(SpaceError::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(norm(kind, &a.sub(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norms_on_known_vectors() {
        let v = Point::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(norm(NormKind::Euclidean, &v), 5.0);
        let w = Point::new(vec![1.0, -2.0]).unwrap();
        assert_eq!(norm(NormKind::Sup, &w), 2.0);
        let z = Point::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(norm(NormKind::L1, &z), 0.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(Point::new(vec![]), Err(SpaceError::EmptyPoint));
        assert_eq!(Point::new(vec![f64::NAN]), Err(SpaceError::NonFinite));
        assert_eq!(Point::new(vec![1.0, f64::INFINITY]), Err(SpaceError::NonFinite));
    }

    #[test]
    fn dist_checks_dims() {
        let a = Point::zero(2);
        let b = Point::zero(3);
        assert!(matches!(
            dist(NormKind::Euclidean, &a, &b),
            Err(SpaceError::DimMismatch { expected: 2, got: 3 })
        ));
    }

    proptest! {
        #[test]
        fn norm_is_positive_definite_and_triangle(
            xs in proptest::collection::vec(-1e6f64..1e6, 1..6),
            ys in proptest::collection::vec(-1e6f64..1e6, 1..6),
        ) {
            let n = xs.len().min(ys.len());
            let a = Point::new(xs[..n].to_vec()).unwrap();
            let b = Point::new(ys[..n].to_vec()).unwrap();
            for kind in [NormKind::Euclidean, NormKind::Sup, NormKind::L1] {
                let na = norm(kind, &a);
                let nb = norm(kind, &b);
                let nab = norm(kind, &a.add(&b));
                prop_assert!(na >= 0.0);
                // triangle inequality with relative slack for rounding
                prop_assert!(nab <= na + nb + 1e-9 * (1.0 + na + nb));
                // homogeneity
                let s = norm(kind, &a.scale(-2.0));
                prop_assert!((s - 2.0 * na).abs() <= 1e-9 * (1.0 + s));
            }
        }

        #[test]
        fn zero_iff_zero_vector(xs in proptest::collection::vec(-1e3f64..1e3, 1..5)) {
            let p = Point::new(xs.clone()).unwrap();
            for kind in [NormKind::Euclidean, NormKind::Sup, NormKind::L1] {
                let n = norm(kind, &p);
                prop_assert_eq!(n == 0.0, xs.iter().all(|&x| x == 0.0));
            }
        }
    }
}
