//! Ensemble runner and bound verifiers.
//!
//! Runs many independent sample paths (path `i` seeded with
//! `master_seed ^ i`), aggregates per-step means with standard errors and
//! truncated tail frequencies, and grades theoretical rates and linear-decay
//! bounds against them with a three-standard-error decision band:
//! a claim only FAILs when the data contradicts it significantly, only
//! PASSes when the data supports it significantly, and is INCONCLUSIVE in
//! between. Grid points a rate places beyond the recorded horizon are
//! SKIPPED.
//!
//! Tail events are measured on the truncated window `[n, H)` rather than
//! `[n, infinity)`; truncation only under-estimates the tail probability, so
//! bound verification errs on the conservative side and every report carries
//! the note.
//!
//! Aggregation is blocked and order-deterministic: paths are processed in
//! fixed blocks and block partials are merged in block order with compensated
//! summation, so reports are bit-identical regardless of thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::thread;

use halpern_core::math::KahanSum;
use halpern_core::rates::{AsRate, FastBound, FastCase, MeanRate};
use halpern_core::scheme::{run_path, Quantity, SchemeConfig, SchemeError, SchemeKind};

/// Fixed aggregation block size (paths per partial).
const BLOCK: u64 = 64;

/// Truncation disclosure attached to every report.
pub const TRUNCATION_NOTE: &str =
    "tail events measured on [n, H), not [n, inf); frequencies under-estimate the untruncated tail";

#[derive(Debug)]
pub enum HarnessError {
    Scheme(SchemeError),
    Plan(String),
    TooManyInvalidPaths { invalid: u64, total: u64 },
    UnknownQuantity(String),
    CaseMismatch(String),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Scheme(e) => write!(f, "{e}"),
            HarnessError::Plan(msg) => write!(f, "invalid plan: {msg}"),
            HarnessError::TooManyInvalidPaths { invalid, total } => {
                write!(f, "{invalid} of {total} paths failed (more than 1%)")
            }
            HarnessError::UnknownQuantity(q) => write!(f, "unknown quantity: {q}"),
            HarnessError::CaseMismatch(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<SchemeError> for HarnessError {
    fn from(e: SchemeError) -> Self {
        HarnessError::Scheme(e)
    }
}

/// Ensemble experiment description.
#[derive(Clone, Debug)]
pub struct McPlan {
    pub config: SchemeConfig,
    pub horizon: u64,
    pub num_paths: u64,
    pub master_seed: u64,
    pub quantities: Vec<Quantity>,
    /// Tolerances for tail curves, sorted descending after validation.
    pub eps_grid: Vec<f64>,
    /// Confidence budgets for almost-sure verification.
    pub lambda_grid: Vec<f64>,
    /// Worker threads; `None` falls back to `HALPERN_LAB_THREADS`, then to
    /// the machine's available parallelism.
    pub threads: Option<usize>,
    /// An almost-sure grid point is SKIPPED unless its index leaves at least
    /// this many recorded steps in the tail window.
    pub tail_margin: u64,
}

impl McPlan {
    pub fn new(config: SchemeConfig, horizon: u64, num_paths: u64, master_seed: u64) -> Self {
        Self {
            config,
            horizon,
            num_paths,
            master_seed,
            quantities: vec![
                Quantity::Dx,
                Quantity::Dy,
                Quantity::Xy,
                Quantity::RTx,
                Quantity::RUx,
                Quantity::RTy,
                Quantity::RUy,
            ],
            eps_grid: vec![1.0, 0.5, 0.2],
            lambda_grid: vec![0.5, 0.2],
            threads: None,
            tail_margin: 10,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.num_paths < 2 {
            return Err(HarnessError::Plan("need at least 2 paths".into()));
        }
        if self.horizon < 1 {
            return Err(HarnessError::Plan("horizon must be at least 1".into()));
        }
        if self.quantities.is_empty() {
            return Err(HarnessError::Plan("no quantities requested".into()));
        }
        if self.tail_margin == 0 {
            return Err(HarnessError::Plan("tail_margin must be at least 1".into()));
        }
        for (name, grid) in [("eps_grid", &self.eps_grid), ("lambda_grid", &self.lambda_grid)] {
            if grid.is_empty() {
                return Err(HarnessError::Plan(format!("{name} is empty")));
            }
            if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(HarnessError::Plan(format!("{name} must be positive")));
            }
            if grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(HarnessError::Plan(format!("{name} must be strictly descending")));
            }
        }
        self.config.validate()?;
        Ok(())
    }

    fn worker_threads(&self) -> usize {
        if let Some(t) = self.threads {
            return t.max(1);
        }
        if let Ok(v) = std::env::var("HALPERN_LAB_THREADS") {
            if let Ok(t) = v.parse::<usize>() {
                return t.max(1);
            }
        }
        thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Mean and standard error per recorded step of one quantity.
#[derive(Clone, Debug)]
pub struct MeanSeries {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Truncated tail frequencies of one quantity at one tolerance:
/// `freq[n] = fraction of paths with sup over i in [n, len) of X_i >= eps`.
#[derive(Clone, Debug)]
pub struct TailCurve {
    pub eps: f64,
    pub freq: Vec<f64>,
}

/// Aggregated ensemble statistics.
#[derive(Clone, Debug)]
pub struct McReport {
    pub config_digest: u64,
    pub scheme_kind: SchemeKind,
    pub master_seed: u64,
    pub horizon: u64,
    pub num_paths: u64,
    pub invalid_paths: u64,
    pub means: BTreeMap<&'static str, MeanSeries>,
    pub tails: BTreeMap<&'static str, Vec<TailCurve>>,
    pub truncation_note: &'static str,
}

impl McReport {
    pub fn mean_series(&self, q: Quantity) -> Option<&MeanSeries> {
        self.means.get(q.name())
    }

    pub fn tail_curves(&self, q: Quantity) -> Option<&[TailCurve]> {
        self.tails.get(q.name()).map(|v| v.as_slice())
    }
}

struct BlockPartial {
    /// per quantity: (sum, sumsq) per step
    sums: Vec<Vec<(f64, f64)>>,
    /// per quantity, per eps, per step: tail-event counts
    tail_counts: Vec<Vec<Vec<u32>>>,
    invalid: u64,
}

fn series_len(q: Quantity, horizon: u64) -> usize {
    match q {
        // the displacement of y needs y_{n+1}, absent at the last step
        Quantity::Dy => horizon.saturating_sub(1) as usize,
        _ => horizon as usize,
    }
}

fn run_block(plan: &McPlan, block_start: u64, block_len: u64) -> Result<BlockPartial, HarnessError> {
    let nq = plan.quantities.len();
    let mut partial = BlockPartial {
        sums: plan
            .quantities
            .iter()
            .map(|q| vec![(0.0, 0.0); series_len(*q, plan.horizon)])
            .collect(),
        tail_counts: plan
            .quantities
            .iter()
            .map(|q| vec![vec![0u32; series_len(*q, plan.horizon)]; plan.eps_grid.len()])
            .collect(),
        invalid: 0,
    };
    let mut suffix: Vec<f64> = Vec::new();
    for i in block_start..block_start + block_len {
        let seed = halpern_core::path_seed(plan.master_seed, i);
        let traj = match run_path(&plan.config, plan.horizon, seed) {
            Ok(t) => t,
            Err(SchemeError::NonFinite { .. }) => {
                partial.invalid += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for (qi, q) in plan.quantities.iter().enumerate().take(nq) {
            let len = series_len(*q, plan.horizon);
            suffix.clear();
            suffix.resize(len, 0.0);
            // forward pass accumulates moments, backward pass the suffix maxima
            for n in 0..len {
                let v = traj.records[n].quantity(*q).unwrap_or(0.0);
                let cell = &mut partial.sums[qi][n];
                cell.0 += v;
                cell.1 += v * v;
                suffix[n] = v;
            }
            for n in (0..len.saturating_sub(1)).rev() {
                suffix[n] = suffix[n].max(suffix[n + 1]);
            }
            for (ei, eps) in plan.eps_grid.iter().enumerate() {
                for n in 0..len {
                    if suffix[n] >= *eps {
                        partial.tail_counts[qi][ei][n] += 1;
                    } else {
                        // suffix maxima are nonincreasing in n
                        break;
                    }
                }
            }
        }
    }
    Ok(partial)
}

/// Runs the ensemble. Deterministic for a given plan: path seeds derive from
/// the master seed and aggregation order is fixed, independent of threading.
pub fn run_ensemble(plan: &McPlan) -> Result<McReport, HarnessError> {
    plan.validate()?;
    let num_blocks = plan.num_paths.div_ceil(BLOCK);
    let threads = plan.worker_threads().min(num_blocks as usize).max(1);

    let mut partials: Vec<Option<BlockPartial>> = Vec::with_capacity(num_blocks as usize);
    partials.resize_with(num_blocks as usize, || None);

    if threads <= 1 {
        for b in 0..num_blocks {
            let start = b * BLOCK;
            let len = BLOCK.min(plan.num_paths - start);
            partials[b as usize] = Some(run_block(plan, start, len)?);
        }
    } else {
        let results: Vec<(u64, Result<BlockPartial, HarnessError>)> = thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads as u64 {
                let plan_ref = &*plan;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut b = t;
                    while b < num_blocks {
                        let start = b * BLOCK;
                        let len = BLOCK.min(plan_ref.num_paths - start);
                        out.push((b, run_block(plan_ref, start, len)));
                        b += threads as u64;
                    }
                    out
                }));
            }
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        });
        for (b, res) in results {
            partials[b as usize] = Some(res?);
        }
    }

    // merge in block order with compensated summation
    let nq = plan.quantities.len();
    let mut invalid = 0u64;
    let mut sums: Vec<Vec<(KahanSum, KahanSum)>> = plan
        .quantities
        .iter()
        .map(|q| vec![(KahanSum::new(), KahanSum::new()); series_len(*q, plan.horizon)])
        .collect();
    let mut tail_totals: Vec<Vec<Vec<u64>>> = plan
        .quantities
        .iter()
        .map(|q| vec![vec![0u64; series_len(*q, plan.horizon)]; plan.eps_grid.len()])
        .collect();
    for partial in partials.into_iter().flatten() {
        invalid += partial.invalid;
        for qi in 0..nq {
            for (n, (s, ss)) in partial.sums[qi].iter().enumerate() {
                sums[qi][n].0.add(*s);
                sums[qi][n].1.add(*ss);
            }
            for (ei, counts) in partial.tail_counts[qi].iter().enumerate() {
                for (n, c) in counts.iter().enumerate() {
                    tail_totals[qi][ei][n] += *c as u64;
                }
            }
        }
    }

    if invalid * 100 > plan.num_paths {
        return Err(HarnessError::TooManyInvalidPaths { invalid, total: plan.num_paths });
    }
    let m = (plan.num_paths - invalid) as f64;
    if m < 2.0 {
        return Err(HarnessError::Plan("fewer than 2 valid paths".into()));
    }

    let mut means = BTreeMap::new();
    let mut tails = BTreeMap::new();
    for (qi, q) in plan.quantities.iter().enumerate() {
        let len = series_len(*q, plan.horizon);
        let mut mean = Vec::with_capacity(len);
        let mut se = Vec::with_capacity(len);
        for n in 0..len {
            let s = sums[qi][n].0.value();
            let ss = sums[qi][n].1.value();
            let mu = s / m;
            let var = ((ss / m) - mu * mu).max(0.0) * m / (m - 1.0);
            mean.push(mu);
            se.push((var / m).sqrt());
        }
        means.insert(q.name(), MeanSeries { mean, se });
        let curves = plan
            .eps_grid
            .iter()
            .enumerate()
            .map(|(ei, eps)| TailCurve {
                eps: *eps,
                freq: tail_totals[qi][ei].iter().map(|c| *c as f64 / m).collect(),
            })
            .collect();
        tails.insert(q.name(), curves);
    }

    Ok(McReport {
        config_digest: plan.config.digest(),
        scheme_kind: plan.config.kind(),
        master_seed: plan.master_seed,
        horizon: plan.horizon,
        num_paths: plan.num_paths,
        invalid_paths: invalid,
        means,
        tails,
        truncation_note: TRUNCATION_NOTE,
    })
}

/// Three-way statistical verdict, plus SKIPPED for unverifiable grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "PASS"),
            Verdict::Fail => write!(f, "FAIL"),
            Verdict::Inconclusive => write!(f, "INCONCLUSIVE"),
            Verdict::Skipped => write!(f, "SKIPPED"),
        }
    }
}

/// Outcome of checking one mean-rate grid point.
#[derive(Clone, Debug)]
pub struct MeanRateCheck {
    pub quantity: &'static str,
    pub eps: f64,
    pub index: u64,
    pub verdict: Verdict,
    pub reason: String,
}

/// Grades `rate` against the recorded means of `quantity`: for each tolerance
/// on the plan grid, every recorded step at or beyond the rate's index must
/// sit below the tolerance. PASS needs `mean + 3 SE < eps` throughout; FAIL
/// needs a statistically significant violation `mean - 3 SE >= eps`.
pub fn verify_mean_rate(
    report: &McReport,
    rate: &MeanRate,
    quantity: Quantity,
    eps_grid: &[f64],
) -> Result<Vec<MeanRateCheck>, HarnessError> {
    let series = report
        .mean_series(quantity)
        .ok_or_else(|| HarnessError::UnknownQuantity(quantity.name().into()))?;
    let len = series.mean.len() as u64;
    let mut out = Vec::new();
    for &eps in eps_grid {
        let index = match rate.index(eps) {
            Ok(i) => i,
            Err(e) => {
                return Err(HarnessError::Plan(format!("rate evaluation failed: {e}")));
            }
        };
        let (verdict, reason) = if index >= len {
            (Verdict::Skipped, format!("index {index} beyond recorded horizon {len}"))
        } else {
            let mut verdict = Verdict::Pass;
            let mut reason = String::from("mean + 3se below eps at every step from index");
            for n in index as usize..len as usize {
                let (mu, se) = (series.mean[n], series.se[n]);
                if mu - 3.0 * se >= eps {
                    verdict = Verdict::Fail;
                    reason = format!("significant violation at n={n}: mean {mu} - 3*{se} >= {eps}");
                    break;
                }
                if mu + 3.0 * se >= eps && verdict == Verdict::Pass {
                    verdict = Verdict::Inconclusive;
                    reason = format!("mean {mu} within 3se of eps at n={n}");
                }
            }
            (verdict, reason)
        };
        out.push(MeanRateCheck { quantity: quantity.name(), eps, index, verdict, reason });
    }
    Ok(out)
}

/// Outcome of checking one almost-sure grid point.
#[derive(Clone, Debug)]
pub struct AsRateCheck {
    pub quantity: &'static str,
    pub lambda: f64,
    pub eps: f64,
    pub index: u64,
    pub tail_freq: f64,
    pub verdict: Verdict,
    pub reason: String,
}

/// Grades an almost-sure rate: the truncated tail frequency at the rate's
/// index must stay below the confidence budget, with binomial 3-SE slack on
/// both sides of the decision.
pub fn verify_as_rate(
    report: &McReport,
    rate: &AsRate,
    quantity: Quantity,
    lambda_grid: &[f64],
    eps_grid: &[f64],
    tail_margin: u64,
) -> Result<Vec<AsRateCheck>, HarnessError> {
    let curves = report
        .tail_curves(quantity)
        .ok_or_else(|| HarnessError::UnknownQuantity(quantity.name().into()))?;
    let m = (report.num_paths - report.invalid_paths) as f64;
    let mut out = Vec::new();
    for &lambda in lambda_grid {
        for &eps in eps_grid {
            let curve = curves
                .iter()
                .find(|c| c.eps == eps)
                .ok_or_else(|| HarnessError::Plan(format!("no tail curve for eps={eps}")))?;
            let len = curve.freq.len() as u64;
            let index = rate
                .index(lambda, eps)
                .map_err(|e| HarnessError::Plan(format!("rate evaluation failed: {e}")))?;
            let (verdict, freq, reason) = if index.saturating_add(tail_margin) > len {
                (
                    Verdict::Skipped,
                    f64::NAN,
                    format!("index {index} leaves less than {tail_margin} steps before horizon {len}"),
                )
            } else {
                let f = curve.freq[index as usize];
                let se = (f * (1.0 - f) / m).sqrt();
                if f + 3.0 * se < lambda {
                    (Verdict::Pass, f, format!("tail freq {f} + 3se < {lambda}"))
                } else if f - 3.0 * se >= lambda {
                    (Verdict::Fail, f, format!("tail freq {f} - 3se >= {lambda}"))
                } else {
                    (Verdict::Inconclusive, f, format!("tail freq {f} within 3se of {lambda}"))
                }
            };
            out.push(AsRateCheck {
                quantity: quantity.name(),
                lambda,
                eps,
                index,
                tail_freq: freq,
                verdict,
                reason,
            });
        }
    }
    Ok(out)
}

/// Outcome of grading one linear-decay bound.
#[derive(Clone, Debug)]
pub struct FastBoundCheck {
    pub quantity: &'static str,
    pub case: &'static str,
    pub l: f64,
    pub mean_verdict: Verdict,
    pub mean_reason: String,
    /// per eps-grid entry: worst tail comparison
    pub tail_verdicts: Vec<(f64, Verdict)>,
}

/// Which recorded quantity a bound case covers, and which scheme shapes it
/// applies to.
pub fn fast_case_quantity(case: FastCase) -> Option<Quantity> {
    match case {
        FastCase::Dx => Some(Quantity::Dx),
        FastCase::Dy => Some(Quantity::Dy),
        FastCase::HalpernResidual => Some(Quantity::RTx),
        FastCase::KmtResidual => Some(Quantity::RUx),
        FastCase::Recursion => None,
    }
}

/// Grades a linear-decay bound pair against the ensemble: the mean curve must
/// not significantly exceed `2L/(n+2)` at any recorded step past
/// `valid_from`, and each truncated tail curve must not significantly exceed
/// `4L/(eps (n+2))`.
pub fn verify_fast_bound(report: &McReport, fb: &FastBound) -> Result<FastBoundCheck, HarnessError> {
    let quantity = fast_case_quantity(fb.case())
        .ok_or_else(|| HarnessError::CaseMismatch("abstract recursion bound has no quantity".into()))?;
    match (fb.case(), report.scheme_kind) {
        (FastCase::HalpernResidual, SchemeKind::Halpern) => {}
        (FastCase::HalpernResidual, k) => {
            return Err(HarnessError::CaseMismatch(format!(
                "anchored residual bound applied to a {k} run"
            )));
        }
        (FastCase::KmtResidual, SchemeKind::KmTikhonov) => {}
        (FastCase::KmtResidual, k) => {
            return Err(HarnessError::CaseMismatch(format!(
                "averaged residual bound applied to a {k} run"
            )));
        }
        _ => {}
    }
    let series = report
        .mean_series(quantity)
        .ok_or_else(|| HarnessError::UnknownQuantity(quantity.name().into()))?;
    let m = (report.num_paths - report.invalid_paths) as f64;

    let mut mean_verdict = Verdict::Pass;
    let mut mean_reason = String::from("mean below 2L/(n+2) within 3se at every recorded step");
    for n in fb.valid_from() as usize..series.mean.len() {
        let bound = fb.mean_bound(n as u64);
        let (mu, se) = (series.mean[n], series.se[n]);
        if mu - 3.0 * se > bound {
            mean_verdict = Verdict::Fail;
            mean_reason = format!("mean {mu} - 3*{se} exceeds bound {bound} at n={n}");
            break;
        }
    }

    let mut tail_verdicts = Vec::new();
    if let Some(curves) = report.tail_curves(quantity) {
        for curve in curves {
            let mut v = Verdict::Pass;
            for n in fb.valid_from() as usize..curve.freq.len() {
                let bound = fb.tail_bound(curve.eps, n as u64);
                let f = curve.freq[n];
                let se = (f * (1.0 - f) / m).sqrt();
                if f - 3.0 * se > bound {
                    v = Verdict::Fail;
                    break;
                }
            }
            tail_verdicts.push((curve.eps, v));
        }
    }

    Ok(FastBoundCheck {
        quantity: quantity.name(),
        case: fb.case().name(),
        l: fb.l(),
        mean_verdict,
        mean_reason,
        tail_verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use halpern_core::noise::NoiseModel;
    use halpern_core::op::NonexpansiveOp;
    use halpern_core::rates::fast_bounds;
    use halpern_core::schedule::Schedule;
    use halpern_core::space::{NormKind, Point};
    use halpern_core::{make_halpern, PathRng};
    use std::sync::Arc;

    fn rotation_plan(paths: u64, horizon: u64) -> McPlan {
        let cfg = make_halpern(
            NonexpansiveOp::Rotation { angle: std::f64::consts::FRAC_PI_2, plane: (0, 1) },
            Point::zero(2),
            Point::new(vec![1.0, 0.0]).unwrap(),
            Schedule::HalpernTwo,
            NoiseModel::GaussianDecay { k1: 1.0 },
            NormKind::Euclidean,
        );
        McPlan::new(cfg, horizon, paths, 42)
    }

    fn identity_plan() -> McPlan {
        let zero = Point::zero(2);
        let cfg = make_halpern(
            NonexpansiveOp::Identity,
            zero.clone(),
            zero,
            Schedule::HalpernTwo,
            NoiseModel::Zero,
            NormKind::Euclidean,
        );
        McPlan::new(cfg, 50, 16, 7)
    }

    #[test]
    fn identity_ensemble_is_all_zero() {
        let report = run_ensemble(&identity_plan()).unwrap();
        for (_, series) in report.means.iter() {
            assert!(series.mean.iter().all(|v| *v == 0.0));
            assert!(series.se.iter().all(|v| *v == 0.0));
        }
        for (_, curves) in report.tails.iter() {
            for c in curves {
                assert!(c.freq.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn reports_are_deterministic_and_thread_invariant() {
        let mut plan = rotation_plan(130, 40);
        plan.threads = Some(1);
        let a = run_ensemble(&plan).unwrap();
        plan.threads = Some(4);
        let b = run_ensemble(&plan).unwrap();
        assert_eq!(a.config_digest, b.config_digest);
        for q in a.means.keys() {
            assert_eq!(a.means[q].mean, b.means[q].mean, "thread-count changed means for {q}");
            assert_eq!(a.means[q].se, b.means[q].se);
        }
        for q in a.tails.keys() {
            for (ca, cb) in a.tails[q].iter().zip(&b.tails[q]) {
                assert_eq!(ca.freq, cb.freq);
            }
        }
    }

    #[test]
    fn truncated_tail_is_monotone_in_n() {
        let plan = rotation_plan(64, 60);
        let report = run_ensemble(&plan).unwrap();
        for curves in report.tails.values() {
            for c in curves {
                for w in c.freq.windows(2) {
                    assert!(w[1] <= w[0] + 1e-15);
                }
            }
        }
    }

    /// On synthetic iid data with a known mean the estimator must cover the
    /// truth within 4 SE nearly always.
    #[test]
    fn estimator_unbiasedness_smoke() {
        let mut rng = PathRng::seed_from_u64(2);
        let truth = 0.5;
        let reps = 300;
        let m = 400;
        let mut covered = 0;
        for _ in 0..reps {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..m {
                let x = rng.uniform(); // mean 1/2
                sum += x;
                sumsq += x * x;
            }
            let mean = sum / m as f64;
            let var = (sumsq / m as f64 - mean * mean) * m as f64 / (m as f64 - 1.0);
            let se = (var / m as f64).sqrt();
            if (mean - truth).abs() <= 4.0 * se {
                covered += 1;
            }
        }
        assert!(covered as f64 >= 0.99 * reps as f64, "covered {covered}/{reps}");
    }

    #[test]
    fn zero_quantity_passes_any_rate() {
        let report = run_ensemble(&identity_plan()).unwrap();
        let rate = MeanRate::zero("test");
        let checks = verify_mean_rate(&report, &rate, Quantity::RTx, &[1.0, 0.1]).unwrap();
        assert!(checks.iter().all(|c| c.verdict == Verdict::Pass));
        let as_rate = AsRate::zero("test");
        let checks =
            verify_as_rate(&report, &as_rate, Quantity::RTx, &[0.5], &[1.0, 0.5, 0.2], 5).unwrap();
        assert!(checks.iter().all(|c| c.verdict == Verdict::Pass));
    }

    #[test]
    fn vacuous_rate_on_live_quantity_fails() {
        // negative control: the all-zero "rate" must FAIL on a quantity that
        // has not converged yet at small eps
        let plan = rotation_plan(256, 60);
        let report = run_ensemble(&plan).unwrap();
        let rate = MeanRate::zero("negative-control");
        let checks = verify_mean_rate(&report, &rate, Quantity::Dx, &[0.01]).unwrap();
        assert_eq!(checks[0].verdict, Verdict::Fail, "{}", checks[0].reason);
    }

    #[test]
    fn skipped_when_rate_beyond_horizon() {
        let plan = rotation_plan(64, 30);
        let report = run_ensemble(&plan).unwrap();
        let rate = MeanRate::new("far", vec![], Arc::new(|_| 1_000_000));
        let checks = verify_mean_rate(&report, &rate, Quantity::Dx, &[0.5]).unwrap();
        assert_eq!(checks[0].verdict, Verdict::Skipped);
    }

    #[test]
    fn fast_bound_passes_on_rotation_case_and_fails_when_shrunk() {
        let plan = rotation_plan(512, 100);
        let report = run_ensemble(&plan).unwrap();
        // K0 from the declared fixed point: K = 4*1 + 2*1 = 6, L = 2*6 + 2*1
        let fb = fast_bounds(FastCase::Dx, 6.0, 1.0, 0.0, None).unwrap();
        let check = verify_fast_bound(&report, &fb).unwrap();
        assert_eq!(check.mean_verdict, Verdict::Pass, "{}", check.mean_reason);
        assert!(check.tail_verdicts.iter().all(|(_, v)| *v == Verdict::Pass));

        // negative control: dividing L by 100 must produce a FAIL
        let tiny = fast_bounds(FastCase::Dx, 0.06, 0.01, 0.0, None).unwrap();
        let check = verify_fast_bound(&report, &tiny).unwrap();
        assert_eq!(check.mean_verdict, Verdict::Fail);
    }

    #[test]
    fn fast_bound_case_mismatch_errors() {
        let plan = rotation_plan(64, 30);
        let report = run_ensemble(&plan).unwrap();
        let fb = fast_bounds(FastCase::KmtResidual, 1.0, 0.0, 1.0, Some(2.0)).unwrap();
        assert!(matches!(
            verify_fast_bound(&report, &fb),
            Err(HarnessError::CaseMismatch(_))
        ));
    }

    #[test]
    fn plan_validation() {
        let mut plan = identity_plan();
        plan.num_paths = 1;
        assert!(plan.validate().is_err());
        let mut plan = identity_plan();
        plan.eps_grid = vec![0.5, 0.5];
        assert!(plan.validate().is_err());
        let mut plan = identity_plan();
        plan.eps_grid = vec![0.2, 0.5];
        assert!(plan.validate().is_err());
    }
}
