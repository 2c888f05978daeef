//! Bridges a rate sheet and an ensemble report: grades every rate and bound
//! on the sheet against the data and collects the verdicts.

use halpern_core::scheme::Quantity;

use crate::harness::{
    run_ensemble, verify_as_rate, verify_fast_bound, verify_mean_rate, AsRateCheck,
    FastBoundCheck, HarnessError, McPlan, McReport, MeanRateCheck, Verdict,
};
use crate::ratesheet::RateSheet;

#[derive(Debug, Default)]
pub struct SheetVerdicts {
    pub mean_checks: Vec<MeanRateCheck>,
    pub as_checks: Vec<AsRateCheck>,
    pub fast_checks: Vec<FastBoundCheck>,
}

impl SheetVerdicts {
    pub fn all_verdicts(&self) -> impl Iterator<Item = Verdict> + '_ {
        self.mean_checks
            .iter()
            .map(|c| c.verdict)
            .chain(self.as_checks.iter().map(|c| c.verdict))
            .chain(self.fast_checks.iter().map(|c| c.mean_verdict))
            .chain(self.fast_checks.iter().flat_map(|c| c.tail_verdicts.iter().map(|(_, v)| *v)))
    }

    pub fn has_fail(&self) -> bool {
        self.all_verdicts().any(|v| v == Verdict::Fail)
    }

    /// Pass count over all graded points.
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        crate::csvio::count_verdicts(self.all_verdicts())
    }

    /// Human-readable description of every FAIL, for diagnostics.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.mean_checks {
            if c.verdict == Verdict::Fail {
                out.push(format!("mean rate on {} at eps={}: {}", c.quantity, c.eps, c.reason));
            }
        }
        for c in &self.as_checks {
            if c.verdict == Verdict::Fail {
                out.push(format!(
                    "as rate on {} at lambda={}, eps={}: {}",
                    c.quantity, c.lambda, c.eps, c.reason
                ));
            }
        }
        for c in &self.fast_checks {
            if c.mean_verdict == Verdict::Fail {
                out.push(format!("fast bound ({}) on {}: {}", c.case, c.quantity, c.mean_reason));
            }
            for (eps, v) in &c.tail_verdicts {
                if *v == Verdict::Fail {
                    out.push(format!("fast tail bound ({}) on {} at eps={eps}", c.case, c.quantity));
                }
            }
        }
        out
    }
}

/// Grades the whole sheet against a report.
pub fn verify_sheet(
    report: &McReport,
    sheet: &RateSheet,
    eps_grid: &[f64],
    lambda_grid: &[f64],
    tail_margin: u64,
) -> Result<SheetVerdicts, HarnessError> {
    let mut out = SheetVerdicts::default();
    for (q, rate) in &sheet.mean_rates {
        out.mean_checks.extend(verify_mean_rate(report, rate, *q, eps_grid)?);
    }
    for (q, rate) in &sheet.as_rates {
        out.as_checks
            .extend(verify_as_rate(report, rate, *q, lambda_grid, eps_grid, tail_margin)?);
    }
    for fb in &sheet.fast_bounds {
        out.fast_checks.push(verify_fast_bound(report, fb)?);
    }
    Ok(out)
}

/// Runs the ensemble for a plan and grades a sheet in one step.
pub fn run_and_verify(
    plan: &McPlan,
    sheet: &RateSheet,
) -> Result<(McReport, SheetVerdicts), HarnessError> {
    let report = run_ensemble(plan)?;
    let verdicts =
        verify_sheet(&report, sheet, &plan.eps_grid, &plan.lambda_grid, plan.tail_margin)?;
    Ok((report, verdicts))
}

/// Convenience for tests: does the sheet hold a mean rate for `q`?
pub fn sheet_has_mean_rate(sheet: &RateSheet, q: Quantity) -> bool {
    sheet.mean_rates.iter().any(|(sq, _)| *sq == q)
}
