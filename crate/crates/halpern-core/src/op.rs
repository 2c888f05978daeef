//! Gallery of concretely evaluable nonexpansive operators.
//!
//! Each variant is 1-Lipschitz with respect to the norms it declares through
//! [`NonexpansiveOp::supports_norm`], and exposes an analytically known fixed
//! point where one exists so that boundedness certificates can be derived
//! from it. [`check_nonexpansive`] estimates the Lipschitz ratio by sampling
//! random pairs and is the property-test backbone for the whole gallery.
//!
//! The anchored Bellman variant is the one exception to sup-norm
//! 1-Lipschitzness: subtracting the offset functional is nonexpansive only in
//! the span seminorm (see `mdp` module docs), so it declares sup-norm support
//! for engine purposes while its certificate lives in span.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::mdp::{bellman_map, FSpec, Mdp, QTable};
use crate::rng::PathRng;
use crate::space::{dist, norm, NormKind, Point, SpaceError};

/// Square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, OpError> {
        let n = rows.len();
        if n == 0 {
            return Err(OpError::Invalid("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(OpError::Invalid(format!(
                    "matrix must be square, row has {} entries for size {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(OpError::Invalid("non-finite matrix entry".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn identity_scaled(n: usize, c: f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = c;
        }
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn apply(&self, x: &Point) -> Point {
        let n = self.n;
        let coords = (0..n)
            .map(|i| {
                let row = &self.data[i * n..(i + 1) * n];
                row.iter().zip(x.coords()).map(|(a, b)| a * b).sum()
            })
            .collect();
        Point::from_raw(coords)
    }

    /// Operator norm with respect to `kind`.
    ///
    /// Sup norm: max absolute row sum; L1: max absolute column sum;
    /// Euclidean: spectral norm by power iteration on `A^T A` (deterministic
    /// start, 500 sweeps, ample for the small matrices used here).
    pub fn op_norm(&self, kind: NormKind) -> f64 {
        let n = self.n;
        match kind {
            NormKind::Sup => (0..n)
                .map(|i| self.data[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum())
                .fold(0.0f64, f64::max),
            NormKind::L1 => (0..n)
                .map(|j| (0..n).map(|i| self.data[i * n + j].abs()).sum())
                .fold(0.0f64, f64::max),
            NormKind::Euclidean => {
                // v <- normalize(A^T A v); slightly asymmetric start so the
                // iterate is not orthogonal to the dominant eigenvector
                let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * i as f64).collect();
                let mut lambda = 0.0;
                for _ in 0..500 {
                    // w = A v, u = A^T w
                    let w: Vec<f64> = (0..n)
                        .map(|i| {
                            self.data[i * n..(i + 1) * n]
                                .iter()
                                .zip(&v)
                                .map(|(a, b)| a * b)
                                .sum()
                        })
                        .collect();
                    let u: Vec<f64> = (0..n)
                        .map(|j| (0..n).map(|i| self.data[i * n + j] * w[i]).sum())
                        .collect();
                    let nrm = math::sqrt(u.iter().map(|x| x * x).sum());
                    if nrm < 1e-300 {
                        return 0.0;
                    }
                    lambda = nrm;
                    v = u.iter().map(|x| x / nrm).collect();
                }
                math::sqrt(lambda)
            }
        }
    }
}

/// Dimension requirement an operator places on the ambient space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimConstraint {
    Any,
    Min(usize),
    Exact(usize),
}

impl DimConstraint {
    fn merge(self, other: DimConstraint) -> Result<DimConstraint, OpError> {
        use DimConstraint::*;
        Ok(match (self, other) {
            (Any, x) | (x, Any) => x,
            (Min(a), Min(b)) => Min(a.max(b)),
            (Min(a), Exact(e)) | (Exact(e), Min(a)) => {
                if e >= a {
                    Exact(e)
                } else {
                    return Err(OpError::Invalid(format!(
                        "conflicting dimensions: exact {e} below minimum {a}"
                    )));
                }
            }
            (Exact(a), Exact(b)) => {
                if a == b {
                    Exact(a)
                } else {
                    return Err(OpError::Invalid(format!("conflicting dimensions: {a} vs {b}")));
                }
            }
        })
    }

    pub fn accepts(&self, dim: usize) -> bool {
        match self {
            DimConstraint::Any => dim >= 1,
            DimConstraint::Min(m) => dim >= *m,
            DimConstraint::Exact(e) => dim == *e,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OpError {
    Space(SpaceError),
    DimMismatch { op: &'static str, expected: DimConstraint, got: usize },
    NormUnsupported { op: &'static str, kind: NormKind },
    Invalid(String),
}

impl fmt::Display for OpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpError::Space(e) => write!(f, "{e}"),
            OpError::DimMismatch { op, expected, got } => {
                write!(f, "{op}: dimension {got} incompatible with {expected:?}")
            }
            OpError::NormUnsupported { op, kind } => {
                write!(f, "{op} is not certified nonexpansive under the {kind} norm")
            }
            OpError::Invalid(msg) => write!(f, "invalid operator: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OpError {}

impl From<SpaceError> for OpError {
    fn from(e: SpaceError) -> Self {
        OpError::Space(e)
    }
}

/// A concretely evaluable 1-Lipschitz map.
#[derive(Clone, Debug)]
pub enum NonexpansiveOp {
    Identity,
    /// Plane rotation by `angle` in coordinates `(plane.0, plane.1)`.
    Rotation { angle: f64, plane: (usize, usize) },
    /// Euclidean projection onto `{x : <normal, x> <= offset}`.
    HalfspaceProjection { normal: Point, offset: f64 },
    /// Euclidean projection onto the closed ball.
    BallProjection { center: Point, radius: f64 },
    /// `x -> (1-weight) x + weight * inner(x)`.
    AveragedMap { inner: Box<NonexpansiveOp>, weight: f64 },
    /// Left-to-right pipeline: `Composition([f, g])` applies `g(f(x))`.
    Composition(Vec<NonexpansiveOp>),
    /// `x -> sum_i w_i op_i(x)` with convex weights.
    ConvexCombination { ops: Vec<NonexpansiveOp>, weights: Vec<f64> },
    /// Linear map with operator norm at most 1 under the declared norm.
    LinearContraction { matrix: Matrix },
    /// Average-reward Bellman map on Q-tables (sup norm). With `anchor` the
    /// relative-value offset `f(Q)` is subtracted.
    BellmanRvi { mdp: Arc<Mdp>, anchor: Option<FSpec> },
}

impl NonexpansiveOp {
    pub fn name(&self) -> &'static str {
        match self {
            NonexpansiveOp::Identity => "identity",
            NonexpansiveOp::Rotation { .. } => "rotation",
            NonexpansiveOp::HalfspaceProjection { .. } => "halfspace_projection",
            NonexpansiveOp::BallProjection { .. } => "ball_projection",
            NonexpansiveOp::AveragedMap { .. } => "averaged_map",
            NonexpansiveOp::Composition(_) => "composition",
            NonexpansiveOp::ConvexCombination { .. } => "convex_combination",
            NonexpansiveOp::LinearContraction { .. } => "linear_contraction",
            NonexpansiveOp::BellmanRvi { .. } => "bellman_rvi",
        }
    }

    /// Structural validation of parameters (dimension merges, weight ranges).
    pub fn validate(&self) -> Result<(), OpError> {
        self.dim_constraint()?;
        match self {
            NonexpansiveOp::Identity => Ok(()),
            NonexpansiveOp::Rotation { angle, plane } => {
                if !angle.is_finite() {
                    return Err(OpError::Invalid("rotation angle not finite".into()));
                }
                if plane.0 == plane.1 {
                    return Err(OpError::Invalid("rotation plane indices must differ".into()));
                }
                Ok(())
            }
            NonexpansiveOp::HalfspaceProjection { normal, offset } => {
                if !offset.is_finite() {
                    return Err(OpError::Invalid("halfspace offset not finite".into()));
                }
                if norm(NormKind::Euclidean, normal) < 1e-12 {
                    return Err(OpError::Invalid("halfspace normal must be nonzero".into()));
                }
                Ok(())
            }
            NonexpansiveOp::BallProjection { radius, .. } => {
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(OpError::Invalid("ball radius must be positive".into()));
                }
                Ok(())
            }
            NonexpansiveOp::AveragedMap { inner, weight } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(OpError::Invalid(format!("averaging weight {weight} not in [0,1]")));
                }
                inner.validate()
            }
            NonexpansiveOp::Composition(ops) => {
                if ops.is_empty() {
                    return Err(OpError::Invalid("empty composition".into()));
                }
                ops.iter().try_for_each(|o| o.validate())
            }
            NonexpansiveOp::ConvexCombination { ops, weights } => {
                if ops.is_empty() || ops.len() != weights.len() {
                    return Err(OpError::Invalid("ops/weights length mismatch".into()));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(OpError::Invalid("weights must be nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(OpError::Invalid(format!("weights sum to {total}, not 1")));
                }
                ops.iter().try_for_each(|o| o.validate())
            }
            NonexpansiveOp::LinearContraction { .. } => Ok(()),
            NonexpansiveOp::BellmanRvi { mdp, anchor } => {
                if let Some(f) = anchor {
                    f.validate(mdp).map_err(|e| OpError::Invalid(format!("{e}")))?;
                }
                Ok(())
            }
        }
    }

    /// Merged dimension requirement of the whole operator tree.
    pub fn dim_constraint(&self) -> Result<DimConstraint, OpError> {
        Ok(match self {
            NonexpansiveOp::Identity => DimConstraint::Any,
            NonexpansiveOp::Rotation { plane, .. } => {
                DimConstraint::Min(plane.0.max(plane.1) + 1)
            }
            NonexpansiveOp::HalfspaceProjection { normal, .. } => {
                DimConstraint::Exact(normal.dim())
            }
            NonexpansiveOp::BallProjection { center, .. } => DimConstraint::Exact(center.dim()),
            NonexpansiveOp::AveragedMap { inner, .. } => inner.dim_constraint()?,
            NonexpansiveOp::Composition(ops) => {
                let mut c = DimConstraint::Any;
                for op in ops {
                    c = c.merge(op.dim_constraint()?)?;
                }
                c
            }
            NonexpansiveOp::ConvexCombination { ops, .. } => {
                let mut c = DimConstraint::Any;
                for op in ops {
                    c = c.merge(op.dim_constraint()?)?;
                }
                c
            }
            NonexpansiveOp::LinearContraction { matrix } => DimConstraint::Exact(matrix.size()),
            NonexpansiveOp::BellmanRvi { mdp, .. } => DimConstraint::Exact(mdp.q_dim()),
        })
    }

    /// Whether the operator is certified 1-Lipschitz under `kind`.
    pub fn supports_norm(&self, kind: NormKind) -> bool {
        match self {
            NonexpansiveOp::Identity => true,
            NonexpansiveOp::Rotation { .. } => kind == NormKind::Euclidean,
            NonexpansiveOp::HalfspaceProjection { .. } | NonexpansiveOp::BallProjection { .. } => {
                kind == NormKind::Euclidean
            }
            NonexpansiveOp::AveragedMap { inner, .. } => inner.supports_norm(kind),
            NonexpansiveOp::Composition(ops) => ops.iter().all(|o| o.supports_norm(kind)),
            NonexpansiveOp::ConvexCombination { ops, .. } => {
                ops.iter().all(|o| o.supports_norm(kind))
            }
            NonexpansiveOp::LinearContraction { matrix } => {
                matrix.op_norm(kind) <= 1.0 + 1e-9
            }
            NonexpansiveOp::BellmanRvi { .. } => kind == NormKind::Sup,
        }
    }

    /// Applies the operator. Errors on dimension mismatch or non-finite output.
    pub fn apply(&self, x: &Point) -> Result<Point, OpError> {
        let constraint = self.dim_constraint()?;
        if !constraint.accepts(x.dim()) {
            return Err(OpError::DimMismatch {
                op: self.name(),
                expected: constraint,
                got: x.dim(),
            });
        }
        let out = match self {
            NonexpansiveOp::Identity => x.clone(),
            NonexpansiveOp::Rotation { angle, plane } => {
                let (i, j) = *plane;
                let (s, c) = libm::sincos(*angle);
                let mut coords = x.coords().to_vec();
                let (xi, xj) = (coords[i], coords[j]);
                coords[i] = c * xi - s * xj;
                coords[j] = s * xi + c * xj;
                Point::from_raw(coords)
            }
            NonexpansiveOp::HalfspaceProjection { normal, offset } => {
                let a2 = normal.dot(normal);
                let excess = (normal.dot(x) - offset).max(0.0);
                x.sub(&normal.scale(excess / a2))
            }
            NonexpansiveOp::BallProjection { center, radius } => {
                let d = x.sub(center);
                let dn = norm(NormKind::Euclidean, &d);
                if dn <= *radius {
                    x.clone()
                } else {
                    center.add(&d.scale(radius / dn))
                }
            }
            NonexpansiveOp::AveragedMap { inner, weight } => {
                let inner_val = inner.apply(x)?;
                x.lerp(&inner_val, *weight)
            }
            NonexpansiveOp::Composition(ops) => {
                let mut cur = x.clone();
                for op in ops {
                    cur = op.apply(&cur)?;
                }
                cur
            }
            NonexpansiveOp::ConvexCombination { ops, weights } => {
                let mut acc = Point::zero(x.dim());
                for (op, w) in ops.iter().zip(weights) {
                    acc = acc.add(&op.apply(x)?.scale(*w));
                }
                acc
            }
            NonexpansiveOp::LinearContraction { matrix } => matrix.apply(x),
            NonexpansiveOp::BellmanRvi { mdp, anchor } => {
                let q = QTable::from_point(mdp, x)
                    .map_err(|e| OpError::Invalid(format!("{e}")))?;
                bellman_map(mdp, anchor.as_ref(), &q).to_point()
            }
        };
        if !out.is_finite() {
            return Err(OpError::Invalid(format!("{} produced non-finite output", self.name())));
        }
        Ok(out)
    }

    /// Analytically known fixed point, where the constructor can certify one.
    pub fn known_fixed_point(&self, dim: usize) -> Option<Point> {
        match self {
            NonexpansiveOp::Identity => Some(Point::zero(dim)),
            NonexpansiveOp::Rotation { .. } => Some(Point::zero(dim)),
            NonexpansiveOp::HalfspaceProjection { normal, offset } => {
                if *offset >= 0.0 {
                    Some(Point::zero(dim))
                } else {
                    // boundary point closest to the origin
                    let a2 = normal.dot(normal);
                    Some(normal.scale(offset / a2))
                }
            }
            NonexpansiveOp::BallProjection { center, .. } => Some(center.clone()),
            NonexpansiveOp::AveragedMap { inner, weight } => {
                if *weight == 0.0 {
                    Some(Point::zero(dim))
                } else {
                    inner.known_fixed_point(dim)
                }
            }
            NonexpansiveOp::Composition(ops) | NonexpansiveOp::ConvexCombination { ops, .. } => {
                // a shared fixed point of every component is fixed for the whole
                let candidate = ops.first()?.known_fixed_point(dim)?;
                for op in ops {
                    let fp = op.known_fixed_point(dim)?;
                    if dist(NormKind::Euclidean, &fp, &candidate).ok()? > 1e-12 {
                        return None;
                    }
                }
                Some(candidate)
            }
            NonexpansiveOp::LinearContraction { .. } => Some(Point::zero(dim)),
            NonexpansiveOp::BellmanRvi { .. } => None,
        }
    }
}

/// `||x - op(x)||` under `kind`; zero iff `x` is a fixed point (up to rounding).
pub fn residual(op: &NonexpansiveOp, kind: NormKind, x: &Point) -> Result<f64, OpError> {
    let y = op.apply(x)?;
    Ok(norm(kind, &x.sub(&y)))
}

/// Outcome of random-pair Lipschitz sampling.
#[derive(Clone, Debug)]
pub struct NonexpansiveReport {
    pub trials: u64,
    pub max_ratio: f64,
    /// Pairs with ratio above `1 + 1e-10`.
    pub violations: u64,
}

/// Estimates the Lipschitz ratio of `op` under `kind` over `trials` random
/// pairs drawn from a box around the origin. The report carries violations
/// rather than erroring.
pub fn check_nonexpansive(
    op: &NonexpansiveOp,
    kind: NormKind,
    trials: u64,
    rng_seed: u64,
) -> Result<NonexpansiveReport, OpError> {
    let dim = match op.dim_constraint()? {
        DimConstraint::Any => 2,
        DimConstraint::Min(m) => m,
        DimConstraint::Exact(e) => e,
    };
    let mut rng = PathRng::seed_from_u64(rng_seed);
    let mut max_ratio = 0.0f64;
    let mut violations = 0;
    for _ in 0..trials {
        let x = rng.uniform_point(dim, 5.0);
        let y = rng.uniform_point(dim, 5.0);
        let d = norm(kind, &x.sub(&y));
        if d < 1e-9 {
            continue;
        }
        let ratio = norm(kind, &op.apply(&x)?.sub(&op.apply(&y)?)) / d;
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        if ratio > 1.0 + 1e-10 {
            violations += 1;
        }
    }
    Ok(NonexpansiveReport { trials, max_ratio, violations })
}

/// Exemplar operators for property tests, all Euclidean-certified, all
/// fixing the origin.
pub fn standard_gallery(dim: usize) -> Vec<NonexpansiveOp> {
    assert!(dim >= 2);
    let rot = NonexpansiveOp::Rotation { angle: core::f64::consts::FRAC_PI_2, plane: (0, 1) };
    let tilt = NonexpansiveOp::Rotation { angle: 0.3, plane: (0, 1) };
    let half = NonexpansiveOp::HalfspaceProjection { normal: Point::basis(dim, 0), offset: 0.0 };
    let ball = NonexpansiveOp::BallProjection { center: Point::zero(dim), radius: 1.5 };
    vec![
        NonexpansiveOp::Identity,
        rot.clone(),
        tilt.clone(),
        half.clone(),
        ball.clone(),
        NonexpansiveOp::AveragedMap { inner: Box::new(rot.clone()), weight: 0.5 },
        NonexpansiveOp::Composition(vec![half.clone(), ball.clone()]),
        NonexpansiveOp::ConvexCombination {
            ops: vec![NonexpansiveOp::Identity, ball, tilt],
            weights: vec![0.2, 0.5, 0.3],
        },
        NonexpansiveOp::LinearContraction { matrix: Matrix::identity_scaled(dim, 0.5) },
    ]
}
