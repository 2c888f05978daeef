//! Report serialization: CSV tables (dot decimal, `\n` line endings, header
//! row mandatory) and a JSON summary. Files are written atomically via a
//! temporary sibling and rename, and every file embeds the tool version,
//! config digest and master seed in a leading comment line.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use halpern_core::rates::{AsRate, MeanRate};
use halpern_core::scheme::Trajectory;

use crate::harness::{AsRateCheck, FastBoundCheck, McReport, MeanRateCheck, Verdict};
use crate::qbench::QBenchReport;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Leading provenance comment shared by all output files.
pub fn provenance_line(config_digest: u64, master_seed: u64) -> String {
    format!("# halpern-lab {TOOL_VERSION} config_digest={config_digest:016x} master_seed={master_seed}\n")
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn atomic_write(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Per-step trajectory table:
/// `n,dx,dy,xy,rTx,rUx,rTy,rUy,xi_norm,delta_norm` (dy empty where absent).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = provenance_line(traj.config_digest, traj.seed);
    out.push_str("n,dx,dy,xy,rTx,rUx,rTy,rUy,xi_norm,delta_norm\n");
    for r in &traj.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.dx,
            fmt_opt(r.dy),
            r.xy,
            r.r_tx,
            r.r_ux,
            r.r_ty,
            r.r_uy,
            r.xi_norm,
            r.delta_norm
        );
    }
    out
}

/// Mean table with the linear bound column where one applies:
/// `quantity,n,mean,se,bound,verdict`.
pub fn means_csv(report: &McReport, fast_checks: &[FastBoundCheck]) -> String {
    let mut out = provenance_line(report.config_digest, report.master_seed);
    out.push_str("quantity,n,mean,se,bound,verdict\n");
    for (q, series) in &report.means {
        let check = fast_checks.iter().find(|c| c.quantity == *q);
        for n in 0..series.mean.len() {
            let (bound, verdict) = match check {
                Some(c) => {
                    let fb = 2.0 * c.l / (n as f64 + 2.0);
                    (format!("{fb}"), format!("{}", c.mean_verdict))
                }
                None => (String::new(), String::new()),
            };
            let _ = writeln!(out, "{q},{n},{},{},{bound},{verdict}", series.mean[n], series.se[n]);
        }
    }
    out
}

/// Tail-verification table: `quantity,eps,lambda,index,tail_freq,bound,verdict`.
pub fn tails_csv(report: &McReport, checks: &[AsRateCheck]) -> String {
    let mut out = provenance_line(report.config_digest, report.master_seed);
    out.push_str("quantity,eps,lambda,index,tail_freq,bound,verdict\n");
    for c in checks {
        let freq = if c.tail_freq.is_nan() { String::new() } else { format!("{}", c.tail_freq) };
        let _ = writeln!(
            out,
            "{},{},{},{},{freq},{},{}",
            c.quantity, c.eps, c.lambda, c.index, c.lambda, c.verdict
        );
    }
    out
}

/// Mean-rate verification table: `quantity,eps,index,verdict,reason`.
pub fn mean_checks_csv(report: &McReport, checks: &[MeanRateCheck]) -> String {
    let mut out = provenance_line(report.config_digest, report.master_seed);
    out.push_str("quantity,eps,index,verdict,reason\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{},\"{}\"",
            c.quantity,
            c.eps,
            c.index,
            c.verdict,
            c.reason.replace('"', "'")
        );
    }
    out
}

/// One evaluated rate-table row.
pub struct RateRow {
    pub quantity: &'static str,
    pub eps: f64,
    pub lambda: Option<f64>,
    pub index: Option<u64>,
    pub origin: String,
    pub constants: String,
    pub status: &'static str,
    pub reason: String,
}

/// Rate table: `quantity,eps,lambda,index,origin,constants,status,reason`.
pub fn rates_csv(config_digest: u64, master_seed: u64, rows: &[RateRow]) -> String {
    let mut out = provenance_line(config_digest, master_seed);
    out.push_str("quantity,eps,lambda,index,origin,constants,status,reason\n");
    for r in rows {
        let lambda = fmt_opt(r.lambda);
        let index = r.index.map(|i| i.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{lambda},{index},{},\"{}\",{},\"{}\"",
            r.quantity,
            r.eps,
            r.origin,
            r.constants,
            r.status,
            r.reason.replace('"', "'")
        );
    }
    out
}

pub fn constants_digest(constants: &[(&'static str, f64)]) -> String {
    constants
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Evaluates a mean rate over a grid into table rows.
pub fn mean_rate_rows(quantity: &'static str, rate: &MeanRate, eps_grid: &[f64]) -> Vec<RateRow> {
    eps_grid
        .iter()
        .map(|&eps| match rate.index(eps) {
            Ok(index) => RateRow {
                quantity,
                eps,
                lambda: None,
                index: Some(index),
                origin: rate.origin().into(),
                constants: constants_digest(rate.constants()),
                status: "OK",
                reason: String::new(),
            },
            Err(e) => RateRow {
                quantity,
                eps,
                lambda: None,
                index: None,
                origin: rate.origin().into(),
                constants: constants_digest(rate.constants()),
                status: "SKIPPED",
                reason: e.to_string(),
            },
        })
        .collect()
}

/// Evaluates an almost-sure rate over the product grid into table rows.
pub fn as_rate_rows(
    quantity: &'static str,
    rate: &AsRate,
    lambda_grid: &[f64],
    eps_grid: &[f64],
) -> Vec<RateRow> {
    let mut rows = Vec::new();
    for &lambda in lambda_grid {
        for &eps in eps_grid {
            rows.push(match rate.index(lambda, eps) {
                Ok(index) => RateRow {
                    quantity,
                    eps,
                    lambda: Some(lambda),
                    index: Some(index),
                    origin: rate.origin().into(),
                    constants: constants_digest(rate.constants()),
                    status: "OK",
                    reason: String::new(),
                },
                Err(e) => RateRow {
                    quantity,
                    eps,
                    lambda: Some(lambda),
                    index: None,
                    origin: rate.origin().into(),
                    constants: constants_digest(rate.constants()),
                    status: "SKIPPED",
                    reason: e.to_string(),
                },
            });
        }
    }
    rows
}

/// Q-learning trace table: `n,sup_residual,greedy_policy_digest,matches_oracle`.
pub fn qlearn_csv(report: &QBenchReport, config_digest: u64, master_seed: u64) -> String {
    let mut out = provenance_line(config_digest, master_seed);
    out.push_str("n,sup_residual,greedy_policy_digest,matches_oracle\n");
    for row in &report.trace {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.n, row.sup_residual, row.greedy_policy_digest, row.matches_oracle
        );
    }
    out
}

/// JSON summary of a verification run.
#[derive(Serialize)]
pub struct Summary {
    pub tool_version: &'static str,
    pub config_digest: String,
    pub master_seed: u64,
    pub scheme_kind: String,
    /// Ambient dimension; all runs live in finite-dimensional real space.
    pub dim: usize,
    pub horizon: u64,
    pub paths: u64,
    pub invalid_paths: u64,
    pub truncation_note: &'static str,
    pub hyp_k0: f64,
    pub hyp_source: &'static str,
    pub hyp_pathwise: bool,
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    pub skipped: usize,
    pub notes: Vec<String>,
}

pub fn count_verdicts(verdicts: impl Iterator<Item = Verdict>) -> (usize, usize, usize, usize) {
    let mut counts = (0, 0, 0, 0);
    for v in verdicts {
        match v {
            Verdict::Pass => counts.0 += 1,
            Verdict::Fail => counts.1 += 1,
            Verdict::Inconclusive => counts.2 += 1,
            Verdict::Skipped => counts.3 += 1,
        }
    }
    counts
}
