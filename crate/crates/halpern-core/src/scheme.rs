//! The iteration engine.
//!
//! Runs the two-operator anchored averaging recursion
//!
//! ```text
//! y_n     = (1 - alpha_n) (T x_n + xi_n) + alpha_n u
//! x_{n+1} = (1 - beta_n) (U y_n + delta_n) + beta_n y_n
//! ```
//!
//! along sample paths, recording every residual quantity together with the
//! noise values so that pathwise inequality checks are exact rather than
//! statistical. Anchored (Halpern-style) and averaged/Tikhonov special cases
//! are obtained by fixing one operator to the identity.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::noise::NoiseModel;
use crate::op::{NonexpansiveOp, OpError};
use crate::rng::PathRng;
use crate::schedule::{Schedule, ScheduleError};
use crate::space::{dist, norm, NormKind, Point, SpaceError};

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    /// Inner operator `T` (applied to `x_n`).
    pub t: NonexpansiveOp,
    /// Outer operator `U` (applied to `y_n`).
    pub u_op: NonexpansiveOp,
    /// Anchor `u`.
    pub anchor: Point,
    pub x0: Point,
    pub alpha: Schedule,
    pub beta: Schedule,
    /// Noise added to `T x_n`.
    pub xi: NoiseModel,
    /// Noise added to `U y_n`.
    pub delta: NoiseModel,
    pub norm: NormKind,
    /// Declared common fixed point of `T` and `U`, when known.
    pub fixed_point: Option<Point>,
}

/// Which classical scheme the configuration specializes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    /// `U = Id`, `delta = 0`: anchored (Halpern) iteration.
    Halpern,
    /// `T = Id`, `xi = 0`, `u = 0`: averaged iteration with Tikhonov factors.
    KmTikhonov,
    General,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeKind::Halpern => write!(f, "halpern"),
            SchemeKind::KmTikhonov => write!(f, "km-tikhonov"),
            SchemeKind::General => write!(f, "general"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeError {
    Space(SpaceError),
    Op(OpError),
    Schedule(ScheduleError),
    /// A non-finite intermediate appeared at this step.
    NonFinite { step: u64 },
    Invalid(String),
}

impl fmt::Display for SchemeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeError::Space(e) => write!(f, "{e}"),
            SchemeError::Op(e) => write!(f, "{e}"),
            SchemeError::Schedule(e) => write!(f, "{e}"),
            SchemeError::NonFinite { step } => write!(f, "non-finite state at step {step}"),
            SchemeError::Invalid(msg) => write!(f, "invalid scheme config: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SchemeError {}

impl From<SpaceError> for SchemeError {
    fn from(e: SpaceError) -> Self {
        SchemeError::Space(e)
    }
}
impl From<OpError> for SchemeError {
    fn from(e: OpError) -> Self {
        SchemeError::Op(e)
    }
}
impl From<ScheduleError> for SchemeError {
    fn from(e: ScheduleError) -> Self {
        SchemeError::Schedule(e)
    }
}

/// Per-step residual quantities. `dy` is absent at the final recorded index,
/// where `y_{n+1}` does not exist.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: u64,
    /// `||x_{n+1} - x_n||`
    pub dx: f64,
    /// `||y_{n+1} - y_n||`
    pub dy: Option<f64>,
    /// `||x_n - y_n||`
    pub xy: f64,
    /// `||T x_n - x_n||`
    pub r_tx: f64,
    /// `||U x_n - x_n||`
    pub r_ux: f64,
    /// `||T y_n - y_n||`
    pub r_ty: f64,
    /// `||U y_n - y_n||`
    pub r_uy: f64,
    pub xi_norm: f64,
    pub delta_norm: f64,
}

impl StepRecord {
    /// Value of a named quantity, used by the verification harness.
    pub fn quantity(&self, q: Quantity) -> Option<f64> {
        match q {
            Quantity::Dx => Some(self.dx),
            Quantity::Dy => self.dy,
            Quantity::Xy => Some(self.xy),
            Quantity::RTx => Some(self.r_tx),
            Quantity::RUx => Some(self.r_ux),
            Quantity::RTy => Some(self.r_ty),
            Quantity::RUy => Some(self.r_uy),
            Quantity::XiNorm => Some(self.xi_norm),
            Quantity::DeltaNorm => Some(self.delta_norm),
        }
    }
}

/// Names for the recorded per-step quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantity {
    Dx,
    Dy,
    Xy,
    RTx,
    RUx,
    RTy,
    RUy,
    XiNorm,
    DeltaNorm,
}

impl Quantity {
    pub const ALL: [Quantity; 9] = [
        Quantity::Dx,
        Quantity::Dy,
        Quantity::Xy,
        Quantity::RTx,
        Quantity::RUx,
        Quantity::RTy,
        Quantity::RUy,
        Quantity::XiNorm,
        Quantity::DeltaNorm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Dx => "dx",
            Quantity::Dy => "dy",
            Quantity::Xy => "xy",
            Quantity::RTx => "rTx",
            Quantity::RUx => "rUx",
            Quantity::RTy => "rTy",
            Quantity::RUy => "rUy",
            Quantity::XiNorm => "xi_norm",
            Quantity::DeltaNorm => "delta_norm",
        }
    }

    pub fn parse(name: &str) -> Option<Quantity> {
        Quantity::ALL.iter().copied().find(|q| q.name() == name)
    }
}

/// One sample path with full state retained for exact pathwise checks.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub seed: u64,
    pub config_digest: u64,
    pub records: Vec<StepRecord>,
    /// `x_0 .. x_H`
    pub xs: Vec<Point>,
    /// `y_0 .. y_{H-1}`
    pub ys: Vec<Point>,
    pub xis: Vec<Point>,
    pub deltas: Vec<Point>,
}

/// Output of a single recursion step.
pub struct StepOutcome {
    pub y: Point,
    pub x_next: Point,
    pub xi: Point,
    pub delta: Point,
    pub tx: Point,
    pub uy: Point,
}

impl SchemeConfig {
    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let dim = self.dim();
        if self.anchor.dim() != dim {
            return Err(SchemeError::Invalid(format!(
                "anchor dim {} != x0 dim {dim}",
                self.anchor.dim()
            )));
        }
        for (label, op) in [("t", &self.t), ("u_op", &self.u_op)] {
            op.validate()?;
            let c = op.dim_constraint()?;
            if !c.accepts(dim) {
                return Err(SchemeError::Invalid(format!(
                    "{label} ({}) incompatible with dimension {dim}",
                    op.name()
                )));
            }
            if !op.supports_norm(self.norm) {
                return Err(SchemeError::Op(OpError::NormUnsupported {
                    op: op.name(),
                    kind: self.norm,
                }));
            }
        }
        self.alpha.validate()?;
        self.beta.validate()?;
        self.xi.validate().map_err(|e| SchemeError::Invalid(e.into()))?;
        self.delta.validate().map_err(|e| SchemeError::Invalid(e.into()))?;
        if let Some(p) = &self.fixed_point {
            if p.dim() != dim {
                return Err(SchemeError::Invalid("fixed point dimension mismatch".into()));
            }
            for (label, op) in [("t", &self.t), ("u_op", &self.u_op)] {
                let r = crate::op::residual(op, self.norm, p)?;
                if r > 1e-12 {
                    return Err(SchemeError::Invalid(format!(
                        "declared fixed point has {label} residual {r:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Which special case this configuration is.
    pub fn kind(&self) -> SchemeKind {
        let u_is_id = matches!(self.u_op, NonexpansiveOp::Identity);
        let t_is_id = matches!(self.t, NonexpansiveOp::Identity);
        let xi_zero = matches!(self.xi, NoiseModel::Zero);
        let delta_zero = matches!(self.delta, NoiseModel::Zero);
        let anchor_zero = self.anchor.coords().iter().all(|c| *c == 0.0);
        if u_is_id && delta_zero {
            SchemeKind::Halpern
        } else if t_is_id && xi_zero && anchor_zero {
            SchemeKind::KmTikhonov
        } else {
            SchemeKind::General
        }
    }

    /// Structural digest of the configuration (FNV-1a over a canonical
    /// encoding); embedded in trajectories and reports for reproducibility.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        hash_op(&mut h, &self.t);
        hash_op(&mut h, &self.u_op);
        hash_point(&mut h, &self.anchor);
        hash_point(&mut h, &self.x0);
        hash_schedule(&mut h, &self.alpha);
        hash_schedule(&mut h, &self.beta);
        hash_noise(&mut h, &self.xi);
        hash_noise(&mut h, &self.delta);
        h.u8(match self.norm {
            NormKind::Euclidean => 0,
            NormKind::Sup => 1,
            NormKind::L1 => 2,
        });
        match &self.fixed_point {
            Some(p) => {
                h.u8(1);
                hash_point(&mut h, p);
            }
            None => h.u8(0),
        }
        h.finish()
    }
}

/// Executes one step of the recursion from `x_n`.
pub fn step(
    cfg: &SchemeConfig,
    n: u64,
    x_n: &Point,
    rng: &mut PathRng,
) -> Result<StepOutcome, SchemeError> {
    if !x_n.is_finite() {
        return Err(SchemeError::NonFinite { step: n });
    }
    let dim = cfg.dim();
    let alpha_n = cfg.alpha.value(n)?;
    let beta_n = cfg.beta.value(n)?;

    let tx = cfg.t.apply(x_n)?;
    let xi_dir = tx.sub(&cfg.anchor);
    let xi = cfg.xi.sample(n, dim, cfg.norm, rng, Some(&xi_dir));
    let y = tx.add(&xi).lerp(&cfg.anchor, alpha_n);

    let uy = cfg.u_op.apply(&y)?;
    let delta_dir = uy.sub(&y);
    let delta = cfg.delta.sample(n, dim, cfg.norm, rng, Some(&delta_dir));
    let x_next = uy.add(&delta).lerp(&y, beta_n);

    if !y.is_finite() || !x_next.is_finite() {
        return Err(SchemeError::NonFinite { step: n });
    }
    Ok(StepOutcome { y, x_next, xi, delta, tx, uy })
}

/// Runs `horizon` steps from `x0` under the path stream derived from `seed`.
/// Deterministic: identical `(config, seed)` yield identical trajectories.
pub fn run_path(cfg: &SchemeConfig, horizon: u64, seed: u64) -> Result<Trajectory, SchemeError> {
    cfg.validate()?;
    if horizon == 0 {
        return Err(SchemeError::Invalid("horizon must be at least 1".into()));
    }
    let h = horizon as usize;
    let mut rng = PathRng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(h + 1);
    let mut ys = Vec::with_capacity(h);
    let mut xis = Vec::with_capacity(h);
    let mut deltas = Vec::with_capacity(h);
    let mut records = Vec::with_capacity(h);

    xs.push(cfg.x0.clone());
    for n in 0..horizon {
        let x_n = xs[n as usize].clone();
        let out = step(cfg, n, &x_n, &mut rng)?;
        let ux = cfg.u_op.apply(&x_n)?;
        let ty = cfg.t.apply(&out.y)?;

        records.push(StepRecord {
            n,
            dx: dist(cfg.norm, &out.x_next, &x_n)?,
            dy: None,
            xy: dist(cfg.norm, &x_n, &out.y)?,
            r_tx: dist(cfg.norm, &out.tx, &x_n)?,
            r_ux: dist(cfg.norm, &ux, &x_n)?,
            r_ty: dist(cfg.norm, &ty, &out.y)?,
            r_uy: dist(cfg.norm, &out.uy, &out.y)?,
            xi_norm: norm(cfg.norm, &out.xi),
            delta_norm: norm(cfg.norm, &out.delta),
        });
        if n > 0 {
            let dy = dist(cfg.norm, &out.y, &ys[n as usize - 1])?;
            records[n as usize - 1].dy = Some(dy);
        }
        xs.push(out.x_next);
        ys.push(out.y);
        xis.push(out.xi);
        deltas.push(out.delta);
    }

    Ok(Trajectory {
        seed,
        config_digest: cfg.digest(),
        records,
        xs,
        ys,
        xis,
        deltas,
    })
}

/// Anchored special case: `U = Id`, `delta = 0`, `beta = 0`, so that
/// `x_{n+1} = y_n = (1 - alpha_n)(T x_n + xi_n) + alpha_n u`.
pub fn make_halpern(
    t: NonexpansiveOp,
    anchor: Point,
    x0: Point,
    alpha: Schedule,
    xi: NoiseModel,
    norm: NormKind,
) -> SchemeConfig {
    let dim = x0.dim();
    let fixed_point = t.known_fixed_point(dim);
    SchemeConfig {
        t,
        u_op: NonexpansiveOp::Identity,
        anchor,
        x0,
        alpha,
        beta: Schedule::Constant(0.0),
        xi,
        delta: NoiseModel::Zero,
        norm,
        fixed_point,
    }
}

/// Averaged/Tikhonov special case: `T = Id`, `xi = 0`, `u = 0`, so that
/// `y_n = gamma_n x_n` with `gamma_n = 1 - alpha_n` and
/// `x_{n+1} = (1 - beta_n)(U(gamma_n x_n) + delta_n) + beta_n gamma_n x_n`.
pub fn make_km_tikhonov(
    u_op: NonexpansiveOp,
    alpha: Schedule,
    x0: Point,
    beta: Schedule,
    delta: NoiseModel,
    norm: NormKind,
) -> SchemeConfig {
    let dim = x0.dim();
    let fixed_point = u_op.known_fixed_point(dim);
    SchemeConfig {
        t: NonexpansiveOp::Identity,
        u_op,
        anchor: Point::zero(dim),
        x0,
        alpha,
        beta,
        xi: NoiseModel::Zero,
        delta,
        norm,
        fixed_point,
    }
}

/// Worst slack of the two step-to-step recurrence inequalities along a path.
/// Slack is `lhs - rhs`; the inequalities hold when it stays below tolerance.
#[derive(Clone, Debug, Default)]
pub struct RecurrenceReport {
    pub max_slack_y: f64,
    pub max_slack_x: f64,
    pub steps_checked: usize,
}

/// Verifies, exactly on the recorded path, that consecutive displacements obey
///
/// ```text
/// ||y_{n+1}-y_n||   <= (1-a_{n+1})(||x_{n+1}-x_n|| + ||xi_{n+1}-xi_n||)
///                      + |a_{n+1}-a_n| ||T x_n + xi_n - u||
/// ||x_{n+2}-x_{n+1}|| <= ||y_{n+1}-y_n|| + (1-b_{n+1}) ||delta_{n+1}-delta_n||
///                      + |b_{n+1}-b_n| ||U y_n + delta_n - y_n||
/// ```
pub fn check_recurrences(
    cfg: &SchemeConfig,
    traj: &Trajectory,
) -> Result<RecurrenceReport, SchemeError> {
    let h = traj.ys.len();
    let mut report = RecurrenceReport::default();
    for n in 0..h.saturating_sub(1) {
        let a_n = cfg.alpha.value(n as u64)?;
        let a_n1 = cfg.alpha.value(n as u64 + 1)?;
        let b_n = cfg.beta.value(n as u64)?;
        let b_n1 = cfg.beta.value(n as u64 + 1)?;

        let dy = dist(cfg.norm, &traj.ys[n + 1], &traj.ys[n])?;
        let dx = dist(cfg.norm, &traj.xs[n + 1], &traj.xs[n])?;
        let dxi = dist(cfg.norm, &traj.xis[n + 1], &traj.xis[n])?;
        let tx = cfg.t.apply(&traj.xs[n])?;
        let drive_y = norm(cfg.norm, &tx.add(&traj.xis[n]).sub(&cfg.anchor));
        let rhs_y = (1.0 - a_n1) * (dx + dxi) + (a_n1 - a_n).abs() * drive_y;
        report.max_slack_y = report.max_slack_y.max(dy - rhs_y);

        let dx_next = dist(cfg.norm, &traj.xs[n + 2], &traj.xs[n + 1])?;
        let ddelta = dist(cfg.norm, &traj.deltas[n + 1], &traj.deltas[n])?;
        let uy = cfg.u_op.apply(&traj.ys[n])?;
        let drive_x = norm(cfg.norm, &uy.add(&traj.deltas[n]).sub(&traj.ys[n]));
        let rhs_x = dy + (1.0 - b_n1) * ddelta + (b_n1 - b_n).abs() * drive_x;
        report.max_slack_x = report.max_slack_x.max(dx_next - rhs_x);

        report.steps_checked += 1;
    }
    Ok(report)
}

/// Worst slack of the pathwise domination inequality
/// `||x_n - p|| <= ||x_0 - p|| + ||u - p|| + sum_{i<n} (||xi_i|| + ||delta_i||)`
/// for the declared common fixed point. `None` when no fixed point is declared.
pub fn check_domination(
    cfg: &SchemeConfig,
    traj: &Trajectory,
) -> Result<Option<f64>, SchemeError> {
    let p = match &cfg.fixed_point {
        Some(p) => p,
        None => return Ok(None),
    };
    let base = dist(cfg.norm, &traj.xs[0], p)? + dist(cfg.norm, &cfg.anchor, p)?;
    let mut noise_sum = 0.0;
    let mut max_slack = f64::NEG_INFINITY;
    for n in 0..traj.xs.len() {
        let lhs = dist(cfg.norm, &traj.xs[n], p)?;
        max_slack = max_slack.max(lhs - (base + noise_sum));
        if n < traj.xis.len() {
            noise_sum += norm(cfg.norm, &traj.xis[n]) + norm(cfg.norm, &traj.deltas[n]);
        }
    }
    Ok(Some(max_slack))
}

// --- structural digest ------------------------------------------------------

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    fn u8(&mut self, v: u8) {
        self.write(&[v]);
    }
    fn u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.write(&v.to_bits().to_le_bytes());
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

fn hash_point(h: &mut Fnv, p: &Point) {
    h.u64(p.dim() as u64);
    for c in p.coords() {
        h.f64(*c);
    }
}

fn hash_schedule(h: &mut Fnv, s: &Schedule) {
    match s {
        Schedule::HalpernTwo => h.u8(0),
        Schedule::Constant(c) => {
            h.u8(1);
            h.f64(*c);
        }
        Schedule::PowerDecay { scale, exponent } => {
            h.u8(2);
            h.f64(*scale);
            h.f64(*exponent);
        }
        Schedule::Custom { prefix, tail } => {
            h.u8(3);
            h.u64(prefix.len() as u64);
            for v in prefix {
                h.f64(*v);
            }
            match tail {
                Some(t) => {
                    h.u8(1);
                    hash_schedule(h, t);
                }
                None => h.u8(0),
            }
        }
    }
}

fn hash_noise(h: &mut Fnv, m: &NoiseModel) {
    match m {
        NoiseModel::Zero => h.u8(0),
        NoiseModel::GaussianDecay { k1 } => {
            h.u8(1);
            h.f64(*k1);
        }
        NoiseModel::BoundedAdversarial { bounds } => {
            h.u8(2);
            h.u64(bounds.len() as u64);
            for b in bounds {
                h.f64(*b);
            }
        }
        NoiseModel::MinibatchSurrogate { sigma, k1 } => {
            h.u8(3);
            h.f64(*sigma);
            h.f64(*k1);
        }
    }
}

fn hash_op(h: &mut Fnv, op: &NonexpansiveOp) {
    match op {
        NonexpansiveOp::Identity => h.u8(0),
        NonexpansiveOp::Rotation { angle, plane } => {
            h.u8(1);
            h.f64(*angle);
            h.u64(plane.0 as u64);
            h.u64(plane.1 as u64);
        }
        NonexpansiveOp::HalfspaceProjection { normal, offset } => {
            h.u8(2);
            hash_point(h, normal);
            h.f64(*offset);
        }
        NonexpansiveOp::BallProjection { center, radius } => {
            h.u8(3);
            hash_point(h, center);
            h.f64(*radius);
        }
        NonexpansiveOp::AveragedMap { inner, weight } => {
            h.u8(4);
            hash_op(h, inner);
            h.f64(*weight);
        }
        NonexpansiveOp::Composition(ops) => {
            h.u8(5);
            h.u64(ops.len() as u64);
            for o in ops {
                hash_op(h, o);
            }
        }
        NonexpansiveOp::ConvexCombination { ops, weights } => {
            h.u8(6);
            h.u64(ops.len() as u64);
            for (o, w) in ops.iter().zip(weights) {
                hash_op(h, o);
                h.f64(*w);
            }
        }
        NonexpansiveOp::LinearContraction { matrix } => {
            h.u8(7);
            h.u64(matrix.size() as u64);
            // hash through application to basis vectors to avoid exposing internals
            for i in 0..matrix.size() {
                let col = matrix.apply(&Point::basis(matrix.size(), i));
                for c in col.coords() {
                    h.f64(*c);
                }
            }
        }
        NonexpansiveOp::BellmanRvi { mdp, anchor } => {
            h.u8(8);
            h.u64(mdp.n_states() as u64);
            h.u64(mdp.n_actions() as u64);
            for s in 0..mdp.n_states() {
                for a in 0..mdp.n_actions() {
                    h.f64(mdp.reward(s, a));
                    for p in mdp.transition_row(s, a) {
                        h.f64(*p);
                    }
                }
            }
            match anchor {
                None => h.u8(0),
                Some(FSpecLocal::PinnedEntry { state, action }) => {
                    h.u8(1);
                    h.u64(*state as u64);
                    h.u64(*action as u64);
                }
                Some(FSpecLocal::MeanOverEntries) => h.u8(2),
            }
        }
    }
}

use crate::mdp::FSpec as FSpecLocal;
