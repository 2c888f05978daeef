//! JSON experiment configuration: schema, validation with field-level
//! diagnostics, and conversion into engine types.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use halpern_core::mdp::{BatchSchedule, FSpec, Mdp};
use halpern_core::noise::NoiseModel;
use halpern_core::op::{Matrix, NonexpansiveOp};
use halpern_core::rates::{hyp_from_fixed_point, HypCertificate, HypSource};
use halpern_core::schedule::Schedule;
use halpern_core::scheme::{Quantity, SchemeConfig};
use halpern_core::space::{dist, NormKind, Point};

use crate::desk::DeskCase;

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(field: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError { field: field.into(), message: message.to_string() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scheme: Option<SchemeSection>,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub rates: RatesSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub qlearn: Option<QlearnSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub dim: usize,
    pub norm: String,
    pub t: OpSpec,
    pub u: OpSpec,
    pub anchor: Vec<f64>,
    pub x0: Vec<f64>,
    pub alpha: ScheduleSpec,
    pub beta: ScheduleSpec,
    pub xi: NoiseSpec,
    pub delta: NoiseSpec,
    #[serde(default)]
    pub fixed_point: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpSpec {
    Identity,
    Rotation { angle: f64, plane: [usize; 2] },
    HalfspaceProjection { normal: Vec<f64>, offset: f64 },
    BallProjection { center: Vec<f64>, radius: f64 },
    AveragedMap { inner: Box<OpSpec>, weight: f64 },
    Composition { ops: Vec<OpSpec> },
    ConvexCombination { ops: Vec<OpSpec>, weights: Vec<f64> },
    LinearContraction { rows: Vec<Vec<f64>> },
    BellmanRvi { mdp: MdpSpec, f: Option<FSpecSpec> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    HalpernTwo,
    Constant { value: f64 },
    PowerDecay { scale: f64, exponent: f64 },
    Custom { prefix: Vec<f64>, tail: Option<Box<ScheduleSpec>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Zero,
    GaussianDecay { k1: f64 },
    BoundedAdversarial { bounds: Vec<f64> },
    MinibatchSurrogate { sigma: f64, k1: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub horizon: u64,
    pub paths: u64,
    pub master_seed: u64,
    pub eps_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub quantities: Option<Vec<String>>,
    pub tail_margin: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            horizon: 200,
            paths: 1000,
            master_seed: 42,
            eps_grid: vec![1.0, 0.5, 0.2],
            lambda_grid: vec![0.5, 0.2],
            quantities: None,
            tail_margin: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    /// `declared-fixed-point`, `user`, or `empirical`.
    pub constants_source: String,
    #[serde(default)]
    pub k0: Option<f64>,
    /// With `constants_source = "user"`: assert the constant also bounds the
    /// mean of a pathwise dominating variable (enables almost-sure rates).
    #[serde(default)]
    pub k0_pathwise: bool,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self { constants_source: "declared-fixed-point".into(), k0: None, k0_pathwise: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into(), formats: vec!["csv".into(), "json".into()] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QlearnSection {
    pub mdp: MdpSpec,
    #[serde(default)]
    pub f: Option<FSpecSpec>,
    pub beta: f64,
    pub steps: u64,
    pub seeds: u64,
    pub master_seed: u64,
    pub batch: BatchSpec,
    pub residual_threshold: f64,
    /// Run the engine/update equivalence check (deterministic kernels only).
    #[serde(default)]
    pub cross_check: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// `rewards[s][a]`
    pub rewards: Vec<Vec<f64>>,
    /// `transitions[s][a][t]`
    pub transitions: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FSpecSpec {
    Pinned { state: usize, action: usize },
    Mean,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BatchSpec {
    Constant { size: u64 },
    Quartic { divisor: f64, cap: Option<u64> },
}

// --- conversions ---------------------------------------------------------------

pub fn parse_norm(name: &str) -> Result<NormKind, ConfigError> {
    match name {
        "euclidean" => Ok(NormKind::Euclidean),
        "sup" => Ok(NormKind::Sup),
        "l1" => Ok(NormKind::L1),
        other => Err(err("norm", format!("unknown norm `{other}` (euclidean | sup | l1)"))),
    }
}

fn to_point(field: &str, coords: &[f64]) -> Result<Point, ConfigError> {
    Point::new(coords.to_vec()).map_err(|e| err(field, e))
}

pub fn to_mdp(spec: &MdpSpec) -> Result<Mdp, ConfigError> {
    let mut rewards = Vec::new();
    for (s, row) in spec.rewards.iter().enumerate() {
        if row.len() != spec.n_actions {
            return Err(err("qlearn.mdp.rewards", format!("state {s} has {} entries", row.len())));
        }
        rewards.extend_from_slice(row);
    }
    let mut transitions = Vec::new();
    for (s, per_action) in spec.transitions.iter().enumerate() {
        if per_action.len() != spec.n_actions {
            return Err(err(
                "qlearn.mdp.transitions",
                format!("state {s} has {} action rows", per_action.len()),
            ));
        }
        for row in per_action {
            if row.len() != spec.n_states {
                return Err(err("qlearn.mdp.transitions", format!("row in state {s} has {} entries", row.len())));
            }
            transitions.extend_from_slice(row);
        }
    }
    Mdp::new(spec.n_states, spec.n_actions, rewards, transitions)
        .map_err(|e| err("qlearn.mdp", e))
}

pub fn to_fspec(spec: Option<&FSpecSpec>) -> FSpec {
    match spec {
        Some(FSpecSpec::Pinned { state, action }) => {
            FSpec::PinnedEntry { state: *state, action: *action }
        }
        Some(FSpecSpec::Mean) => FSpec::MeanOverEntries,
        None => FSpec::PinnedEntry { state: 0, action: 0 },
    }
}

pub fn to_batch(spec: &BatchSpec) -> BatchSchedule {
    match spec {
        BatchSpec::Constant { size } => BatchSchedule::Constant(*size),
        BatchSpec::Quartic { divisor, cap } => {
            BatchSchedule::Quartic { divisor: *divisor, cap: *cap }
        }
    }
}

fn to_op(field: &str, spec: &OpSpec) -> Result<NonexpansiveOp, ConfigError> {
    let op = match spec {
        OpSpec::Identity => NonexpansiveOp::Identity,
        OpSpec::Rotation { angle, plane } => {
            NonexpansiveOp::Rotation { angle: *angle, plane: (plane[0], plane[1]) }
        }
        OpSpec::HalfspaceProjection { normal, offset } => NonexpansiveOp::HalfspaceProjection {
            normal: to_point(field, normal)?,
            offset: *offset,
        },
        OpSpec::BallProjection { center, radius } => NonexpansiveOp::BallProjection {
            center: to_point(field, center)?,
            radius: *radius,
        },
        OpSpec::AveragedMap { inner, weight } => NonexpansiveOp::AveragedMap {
            inner: Box::new(to_op(field, inner)?),
            weight: *weight,
        },
        OpSpec::Composition { ops } => {
            let mut parts = Vec::new();
            for o in ops {
                parts.push(to_op(field, o)?);
            }
            NonexpansiveOp::Composition(parts)
        }
        OpSpec::ConvexCombination { ops, weights } => {
            let mut parts = Vec::new();
            for o in ops {
                parts.push(to_op(field, o)?);
            }
            NonexpansiveOp::ConvexCombination { ops: parts, weights: weights.clone() }
        }
        OpSpec::LinearContraction { rows } => NonexpansiveOp::LinearContraction {
            matrix: Matrix::from_rows(rows.clone()).map_err(|e| err(field, e))?,
        },
        OpSpec::BellmanRvi { mdp, f } => NonexpansiveOp::BellmanRvi {
            mdp: Arc::new(to_mdp(mdp)?),
            anchor: f.as_ref().map(|f| to_fspec(Some(f))),
        },
    };
    op.validate().map_err(|e| err(field, e))?;
    Ok(op)
}

fn to_schedule(field: &str, spec: &ScheduleSpec) -> Result<Schedule, ConfigError> {
    let s = match spec {
        ScheduleSpec::HalpernTwo => Schedule::HalpernTwo,
        ScheduleSpec::Constant { value } => Schedule::Constant(*value),
        ScheduleSpec::PowerDecay { scale, exponent } => {
            Schedule::PowerDecay { scale: *scale, exponent: *exponent }
        }
        ScheduleSpec::Custom { prefix, tail } => Schedule::Custom {
            prefix: prefix.clone(),
            tail: match tail {
                Some(t) => Some(Box::new(to_schedule(field, t)?)),
                None => None,
            },
        },
    };
    s.validate().map_err(|e| err(field, e))?;
    Ok(s)
}

fn to_noise(field: &str, spec: &NoiseSpec) -> Result<NoiseModel, ConfigError> {
    let m = match spec {
        NoiseSpec::Zero => NoiseModel::Zero,
        NoiseSpec::GaussianDecay { k1 } => NoiseModel::GaussianDecay { k1: *k1 },
        NoiseSpec::BoundedAdversarial { bounds } => {
            NoiseModel::BoundedAdversarial { bounds: bounds.clone() }
        }
        NoiseSpec::MinibatchSurrogate { sigma, k1 } => {
            NoiseModel::MinibatchSurrogate { sigma: *sigma, k1: *k1 }
        }
    };
    m.validate().map_err(|e| err(field, e))?;
    Ok(m)
}

/// The quadratic-decay constant of a noise model, when certified.
pub fn quadratic_constant(m: &NoiseModel) -> Option<f64> {
    match m {
        NoiseModel::Zero => Some(0.0),
        NoiseModel::GaussianDecay { k1 } => Some(*k1),
        NoiseModel::MinibatchSurrogate { k1, .. } => Some(*k1),
        NoiseModel::BoundedAdversarial { .. } => None,
    }
}

pub fn to_scheme_config(section: &SchemeSection) -> Result<SchemeConfig, ConfigError> {
    let norm = parse_norm(&section.norm)?;
    if section.x0.len() != section.dim {
        return Err(err("scheme.x0", format!("has {} coords, dim is {}", section.x0.len(), section.dim)));
    }
    if section.anchor.len() != section.dim {
        return Err(err(
            "scheme.anchor",
            format!("has {} coords, dim is {}", section.anchor.len(), section.dim),
        ));
    }
    let cfg = SchemeConfig {
        t: to_op("scheme.t", &section.t)?,
        u_op: to_op("scheme.u", &section.u)?,
        anchor: to_point("scheme.anchor", &section.anchor)?,
        x0: to_point("scheme.x0", &section.x0)?,
        alpha: to_schedule("scheme.alpha", &section.alpha)?,
        beta: to_schedule("scheme.beta", &section.beta)?,
        xi: to_noise("scheme.xi", &section.xi)?,
        delta: to_noise("scheme.delta", &section.delta)?,
        norm,
        fixed_point: match &section.fixed_point {
            Some(p) => Some(to_point("scheme.fixed_point", p)?),
            None => None,
        },
    };
    cfg.validate().map_err(|e| err("scheme", e))?;
    Ok(cfg)
}

/// Quantities requested by the plan (default: all scheme residuals).
pub fn to_quantities(names: Option<&[String]>) -> Result<Option<Vec<Quantity>>, ConfigError> {
    match names {
        None => Ok(None),
        Some(names) => {
            let mut out = Vec::new();
            for n in names {
                out.push(
                    Quantity::parse(n)
                        .ok_or_else(|| err("mc.quantities", format!("unknown quantity `{n}`")))?,
                );
            }
            Ok(Some(out))
        }
    }
}

/// Resolves the boundedness certificate per the configured constants source,
/// filling in the derived common fixed point where one is available.
pub fn resolve_case(
    scheme: &SchemeSection,
    rates: &RatesSection,
    mc: &McSection,
) -> Result<DeskCase, ConfigError> {
    let mut config = to_scheme_config(scheme)?;
    let dim = config.dim();
    // derive a common fixed point when none is declared
    if config.fixed_point.is_none() {
        if let Some(p) = config.t.known_fixed_point(dim) {
            let fixes_both = halpern_core::residual(&config.u_op, config.norm, &p)
                .map(|r| r <= 1e-12)
                .unwrap_or(false)
                && halpern_core::residual(&config.t, config.norm, &p)
                    .map(|r| r <= 1e-12)
                    .unwrap_or(false);
            if fixes_both {
                config.fixed_point = Some(p);
            }
        }
    }

    let k1 = quadratic_constant(&config.xi).unwrap_or(0.0);
    let k2 = quadratic_constant(&config.delta).unwrap_or(0.0);

    let hyp: HypCertificate = match rates.constants_source.as_str() {
        "declared-fixed-point" => {
            let p = config.fixed_point.as_ref().ok_or_else(|| {
                err(
                    "rates.constants_source",
                    "declared-fixed-point requires a common fixed point (scheme.fixed_point or a gallery-declared one)",
                )
            })?;
            let k_point = dist(config.norm, &config.x0, p)
                .and_then(|a| dist(config.norm, &config.anchor, p).map(|b| a.max(b)))
                .map_err(|e| err("scheme.fixed_point", e))?;
            hyp_from_fixed_point(k_point, config.xi.sum_bound(), config.delta.sum_bound())
        }
        "user" => {
            let k0 = rates
                .k0
                .ok_or_else(|| err("rates.k0", "required when constants_source = \"user\""))?;
            if !(k0.is_finite() && k0 > 0.0) {
                return Err(err("rates.k0", "must be a positive real"));
            }
            HypCertificate { k0, pathwise: rates.k0_pathwise, source: HypSource::User }
        }
        "empirical" => {
            let k0 = estimate_hyp_constant(&config, 32, mc.horizon.min(500), mc.master_seed)
                .map_err(|e| err("rates.constants_source", e))?;
            HypCertificate { k0, pathwise: false, source: HypSource::Empirical }
        }
        other => {
            return Err(err(
                "rates.constants_source",
                format!("unknown source `{other}` (declared-fixed-point | user | empirical)"),
            ));
        }
    };

    let k_point = match &config.fixed_point {
        Some(p) => dist(config.norm, &config.x0, p)
            .and_then(|a| dist(config.norm, &config.anchor, p).map(|b| a.max(b)))
            .map_err(|e| err("scheme.fixed_point", e))?,
        None => 0.0,
    };

    Ok(DeskCase { name: "config", config, k_point, hyp, k1, k2 })
}

/// Pilot-ensemble estimate of the boundedness constant: the largest observed
/// per-step mean of the four driving quantities, with 50% headroom. Flagged
/// as empirical in reports.
pub fn estimate_hyp_constant(
    config: &SchemeConfig,
    paths: u64,
    horizon: u64,
    master_seed: u64,
) -> Result<f64, String> {
    use halpern_core::space::norm as norm_of;
    let horizon = horizon.max(1);
    let mut sums = vec![0.0f64; horizon as usize * 4];
    for i in 0..paths {
        let traj = halpern_core::run_path(config, horizon, halpern_core::path_seed(master_seed, i))
            .map_err(|e| e.to_string())?;
        let uu = config
            .u_op
            .apply(&config.anchor)
            .map_err(|e| e.to_string())?;
        let r_uu = norm_of(config.norm, &uu.sub(&config.anchor));
        for n in 0..horizon as usize {
            let tx = config.t.apply(&traj.xs[n]).map_err(|e| e.to_string())?;
            let uy = config.u_op.apply(&traj.ys[n]).map_err(|e| e.to_string())?;
            sums[n * 4] += norm_of(config.norm, &tx.sub(&config.anchor));
            sums[n * 4 + 1] += traj.records[n].r_uy;
            sums[n * 4 + 2] += r_uu;
            sums[n * 4 + 3] += norm_of(config.norm, &uy.sub(&config.anchor));
        }
    }
    let max_mean = sums.iter().fold(0.0f64, |m, s| m.max(s / paths as f64));
    Ok((max_mean * 1.5).max(1e-6))
}
