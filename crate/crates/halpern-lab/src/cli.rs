//! Command-line front end: `simulate | rates | verify | qlearn`, all driven
//! by a JSON experiment configuration.
//!
//! Exit codes: 0 success (verify: no FAIL), 1 verification FAIL,
//! 2 configuration error (the diagnostic names the offending field),
//! 3 runtime error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use halpern_core::mdp::BatchSchedule;
use halpern_core::run_path;

use crate::config::{
    to_batch, to_fspec, to_mdp, to_quantities, ExperimentConfig, QlearnSection,
};
use crate::csvio;
use crate::harness::{run_ensemble, McPlan};
use crate::qbench::{run_qbench, QBenchParams};
use crate::ratesheet::build_rate_sheet;
use crate::verify::verify_sheet;

#[derive(Parser)]
#[command(
    name = "halpern-lab",
    version,
    about = "Simulate anchored/averaged stochastic fixed-point iterations and verify their rate bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run sample paths and write trajectory/ensemble tables.
    Simulate(RunArgs),
    /// Tabulate every applicable rate on the tolerance grids.
    Rates(RunArgs),
    /// Run the ensemble and grade all rates and bounds against it.
    Verify(RunArgs),
    /// Run the Q-learning benchmark against the value-iteration oracle.
    Qlearn(RunArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config's output.dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path-count override.
    #[arg(long)]
    pub paths: Option<u64>,
    /// Horizon override.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Worker threads (falls back to HALPERN_LAB_THREADS, then to all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let (args, runner): (&RunArgs, fn(&RunArgs, ExperimentConfig) -> Result<i32, CmdError>) =
        match &cli.command {
            Command::Simulate(a) => (a, cmd_simulate),
            Command::Rates(a) => (a, cmd_rates),
            Command::Verify(a) => (a, cmd_verify),
            Command::Qlearn(a) => (a, cmd_qlearn),
        };
    let config = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match runner(args, config) {
        Ok(code) => code,
        Err(CmdError::Config(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(CmdError::Runtime(e)) => {
            eprintln!("error: {e}");
            3
        }
    }
}

pub enum CmdError {
    Config(String),
    Runtime(String),
}

impl From<crate::config::ConfigError> for CmdError {
    fn from(e: crate::config::ConfigError) -> Self {
        CmdError::Config(e.to_string())
    }
}

impl From<crate::harness::HarnessError> for CmdError {
    fn from(e: crate::harness::HarnessError) -> Self {
        match e {
            crate::harness::HarnessError::Plan(_) | crate::harness::HarnessError::Scheme(_) => {
                CmdError::Config(e.to_string())
            }
            other => CmdError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("config parse error: {e}"))
}

struct Resolved {
    case: crate::desk::DeskCase,
    plan: McPlan,
    out_dir: PathBuf,
}

fn resolve(args: &RunArgs, config: &ExperimentConfig) -> Result<Resolved, CmdError> {
    let scheme = config
        .scheme
        .as_ref()
        .ok_or_else(|| CmdError::Config("config field `scheme`: required for this command".into()))?;
    let mut mc = config.mc.clone();
    if let Some(seed) = args.seed {
        mc.master_seed = seed;
    }
    if let Some(paths) = args.paths {
        mc.paths = paths;
    }
    if let Some(h) = args.horizon {
        mc.horizon = h;
    }
    let case = crate::config::resolve_case(scheme, &config.rates, &mc)?;
    let mut plan = McPlan::new(case.config.clone(), mc.horizon, mc.paths, mc.master_seed);
    plan.eps_grid = {
        let mut g = mc.eps_grid.clone();
        g.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        g.dedup();
        g
    };
    plan.lambda_grid = {
        let mut g = mc.lambda_grid.clone();
        g.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        g.dedup();
        g
    };
    plan.tail_margin = mc.tail_margin;
    plan.threads = args.threads;
    if let Some(qs) = to_quantities(mc.quantities.as_deref())? {
        plan.quantities = qs;
    }
    plan.validate()?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    Ok(Resolved { case, plan, out_dir })
}

fn cmd_simulate(args: &RunArgs, config: ExperimentConfig) -> Result<i32, CmdError> {
    let r = resolve(args, &config)?;
    let traj = run_path(&r.plan.config, r.plan.horizon, r.plan.master_seed)
        .map_err(|e| CmdError::Runtime(e.to_string()))?;
    csvio::atomic_write(&r.out_dir.join("trajectory.csv"), &csvio::trajectory_csv(&traj))?;
    let report = run_ensemble(&r.plan)?;
    csvio::atomic_write(&r.out_dir.join("means.csv"), &csvio::means_csv(&report, &[]))?;
    let summary = summary_json(&r, &report, 0, 0, 0, 0, vec![])?;
    csvio::atomic_write(&r.out_dir.join("summary.json"), &summary)?;
    println!(
        "simulate: wrote trajectory.csv and means.csv for {} paths x {} steps to {}",
        r.plan.num_paths,
        r.plan.horizon,
        r.out_dir.display()
    );
    Ok(0)
}

fn cmd_rates(args: &RunArgs, config: ExperimentConfig) -> Result<i32, CmdError> {
    let r = resolve(args, &config)?;
    let sheet = build_rate_sheet(&r.case).map_err(|e| CmdError::Runtime(e.to_string()))?;
    let mut rows = Vec::new();
    for (q, rate) in &sheet.mean_rates {
        rows.extend(csvio::mean_rate_rows(q.name(), rate, &r.plan.eps_grid));
    }
    for (q, rate) in &sheet.as_rates {
        rows.extend(csvio::as_rate_rows(q.name(), rate, &r.plan.lambda_grid, &r.plan.eps_grid));
    }
    for fb in &sheet.fast_bounds {
        rows.extend(csvio::mean_rate_rows(fb.case().name(), &fb.mean_rate(), &r.plan.eps_grid));
        rows.extend(csvio::as_rate_rows(
            fb.case().name(),
            &fb.as_rate(),
            &r.plan.lambda_grid,
            &r.plan.eps_grid,
        ));
    }
    for (name, reason) in &sheet.skipped {
        rows.push(csvio::RateRow {
            quantity: "-",
            eps: f64::NAN,
            lambda: None,
            index: None,
            origin: name.clone(),
            constants: String::new(),
            status: "SKIPPED",
            reason: reason.clone(),
        });
    }
    let digest = r.case.config.digest();
    csvio::atomic_write(
        &r.out_dir.join("rates.csv"),
        &csvio::rates_csv(digest, r.plan.master_seed, &rows),
    )?;

    // plot-ready linear bounds per step
    let mut bounds = csvio::provenance_line(digest, r.plan.master_seed);
    bounds.push_str("case,quantity,n,mean_bound,l\n");
    for fb in &sheet.fast_bounds {
        let q = crate::harness::fast_case_quantity(fb.case()).map(|q| q.name()).unwrap_or("-");
        for n in 0..r.plan.horizon {
            bounds.push_str(&format!(
                "{},{q},{n},{},{}\n",
                fb.case().name(),
                fb.mean_bound(n),
                fb.l()
            ));
        }
    }
    csvio::atomic_write(&r.out_dir.join("bounds.csv"), &bounds)?;
    println!("rates: wrote rates.csv ({} rows) and bounds.csv to {}", rows.len(), r.out_dir.display());
    Ok(0)
}

fn cmd_verify(args: &RunArgs, config: ExperimentConfig) -> Result<i32, CmdError> {
    let r = resolve(args, &config)?;
    let sheet = build_rate_sheet(&r.case).map_err(|e| CmdError::Runtime(e.to_string()))?;
    let report = run_ensemble(&r.plan)?;
    let verdicts =
        verify_sheet(&report, &sheet, &r.plan.eps_grid, &r.plan.lambda_grid, r.plan.tail_margin)?;

    csvio::atomic_write(
        &r.out_dir.join("means.csv"),
        &csvio::means_csv(&report, &verdicts.fast_checks),
    )?;
    csvio::atomic_write(
        &r.out_dir.join("tails.csv"),
        &csvio::tails_csv(&report, &verdicts.as_checks),
    )?;
    csvio::atomic_write(
        &r.out_dir.join("mean_checks.csv"),
        &csvio::mean_checks_csv(&report, &verdicts.mean_checks),
    )?;
    let (pass, fail, inconclusive, skipped) = verdicts.counts();
    let mut notes: Vec<String> =
        sheet.skipped.iter().map(|(n, reason)| format!("{n}: {reason}")).collect();
    if !sheet.fast_bounds.is_empty() {
        notes.push(
            "linear-bound constants beyond the dx case are assembled from the inequality chains; they are one valid choice, validated empirically".into(),
        );
    }
    notes.extend(verdicts.failures());
    let summary = summary_json(&r, &report, pass, fail, inconclusive, skipped, notes)?;
    csvio::atomic_write(&r.out_dir.join("summary.json"), &summary)?;

    println!(
        "verify: {pass} PASS, {fail} FAIL, {inconclusive} INCONCLUSIVE, {skipped} SKIPPED -> {}",
        r.out_dir.display()
    );
    if fail > 0 {
        for f in verdicts.failures() {
            eprintln!("FAIL: {f}");
        }
        return Ok(1);
    }
    if inconclusive > 0 {
        println!("warning: {inconclusive} inconclusive grid points");
    }
    Ok(0)
}

fn summary_json(
    r: &Resolved,
    report: &crate::harness::McReport,
    pass: usize,
    fail: usize,
    inconclusive: usize,
    skipped: usize,
    notes: Vec<String>,
) -> Result<String, CmdError> {
    let summary = csvio::Summary {
        tool_version: csvio::TOOL_VERSION,
        config_digest: format!("{:016x}", report.config_digest),
        master_seed: report.master_seed,
        scheme_kind: report.scheme_kind.to_string(),
        dim: r.case.config.dim(),
        horizon: report.horizon,
        paths: report.num_paths,
        invalid_paths: report.invalid_paths,
        truncation_note: report.truncation_note,
        hyp_k0: r.case.hyp.k0,
        hyp_source: r.case.hyp.source.name(),
        hyp_pathwise: r.case.hyp.pathwise,
        pass,
        fail,
        inconclusive,
        skipped,
        notes,
    };
    serde_json::to_string_pretty(&summary).map_err(|e| CmdError::Runtime(e.to_string()))
}

fn cmd_qlearn(args: &RunArgs, config: ExperimentConfig) -> Result<i32, CmdError> {
    let section: &QlearnSection = config
        .qlearn
        .as_ref()
        .ok_or_else(|| CmdError::Config("config field `qlearn`: required for this command".into()))?;
    let mdp = to_mdp(&section.mdp)?;
    let f = to_fspec(section.f.as_ref());
    let params = QBenchParams {
        steps: args.horizon.unwrap_or(section.steps),
        seeds: section.seeds,
        beta: section.beta,
        batch: to_batch(&section.batch),
        master_seed: args.seed.unwrap_or(section.master_seed),
        residual_threshold: section.residual_threshold,
        trace_stride: 10,
    };
    let report = run_qbench(&mdp, &f, &params).map_err(|e| CmdError::Runtime(e.to_string()))?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));

    // config digest: hash the q-learning operator shape through a scheme view
    let digest = {
        let op = halpern_core::NonexpansiveOp::BellmanRvi {
            mdp: std::sync::Arc::new(mdp.clone()),
            anchor: Some(f),
        };
        let cfg = halpern_core::make_km_tikhonov(
            op,
            halpern_core::Schedule::HalpernTwo,
            halpern_core::Point::zero(mdp.q_dim()),
            halpern_core::Schedule::Constant(params.beta),
            halpern_core::NoiseModel::Zero,
            halpern_core::NormKind::Sup,
        );
        cfg.digest()
    };
    csvio::atomic_write(
        &out_dir.join("qlearn.csv"),
        &csvio::qlearn_csv(&report, digest, params.master_seed),
    )?;

    let cross_check = if section.cross_check {
        Some(run_cross_check(&mdp, &f, &params))
    } else {
        None
    };
    #[derive(serde::Serialize)]
    struct QSummary {
        tool_version: &'static str,
        config_digest: String,
        master_seed: u64,
        rho_star: f64,
        oracle_policy: Vec<usize>,
        seeds: u64,
        policy_match_fraction: f64,
        residual_ok_fraction: f64,
        final_noise_bound: Option<f64>,
        batch_capped: bool,
        cross_check_exact: Option<bool>,
    }
    let summary = QSummary {
        tool_version: csvio::TOOL_VERSION,
        config_digest: format!("{digest:016x}"),
        master_seed: params.master_seed,
        rho_star: report.rho_star,
        oracle_policy: report.oracle_policy.clone(),
        seeds: report.seeds,
        policy_match_fraction: report.policy_match_fraction,
        residual_ok_fraction: report.residual_ok_fraction,
        final_noise_bound: report.final_noise_bound,
        batch_capped: report.batch_capped,
        cross_check_exact: cross_check,
    };
    csvio::atomic_write(
        &out_dir.join("qsummary.json"),
        &serde_json::to_string_pretty(&summary).map_err(|e| CmdError::Runtime(e.to_string()))?,
    )?;
    println!(
        "qlearn: gain {} | policy match {:.0}% | residual ok {:.0}% -> {}",
        report.rho_star,
        100.0 * report.policy_match_fraction,
        100.0 * report.residual_ok_fraction,
        out_dir.display()
    );
    Ok(0)
}

/// Equivalence of the sampled update and the engine run, exact on
/// deterministic kernels (forced batch size 1).
fn run_cross_check(
    mdp: &halpern_core::mdp::Mdp,
    f: &halpern_core::mdp::FSpec,
    params: &QBenchParams,
) -> bool {
    use halpern_core::mdp::{q_tikhonov_step, QTable};
    use halpern_core::PathRng;
    let cfg = halpern_core::make_km_tikhonov(
        halpern_core::NonexpansiveOp::BellmanRvi {
            mdp: std::sync::Arc::new(mdp.clone()),
            anchor: Some(*f),
        },
        halpern_core::Schedule::HalpernTwo,
        halpern_core::Point::zero(mdp.q_dim()),
        halpern_core::Schedule::Constant(params.beta),
        halpern_core::NoiseModel::Zero,
        halpern_core::NormKind::Sup,
    );
    let steps = params.steps.min(200);
    let traj = match run_path(&cfg, steps, 0) {
        Ok(t) => t,
        Err(_) => return false,
    };
    let mut q = QTable::zeros(mdp);
    let beta = halpern_core::Schedule::Constant(params.beta);
    let alpha = halpern_core::Schedule::HalpernTwo;
    let batch = BatchSchedule::Constant(1);
    let mut rng = PathRng::seed_from_u64(0);
    for n in 0..steps {
        let engine = match QTable::from_point(mdp, &traj.xs[n as usize]) {
            Ok(t) => t,
            Err(_) => return false,
        };
        if q.values() != engine.values() {
            return false;
        }
        q = match q_tikhonov_step(mdp, f, &q, n, &beta, &alpha, &batch, &mut rng) {
            Ok(next) => next,
            Err(_) => return false,
        };
    }
    true
}
