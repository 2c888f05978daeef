//! Assembles every rate and bound the calculus offers for a given
//! configuration, recording per-construction skips (with reasons) where a
//! hypothesis is unavailable instead of failing the whole sheet.

use halpern_core::geometry::{ui_from_error_sums, UcModulus, UiModulus};
use halpern_core::noise::NoiseModel;
use halpern_core::rates::{
    fast_bounds, geometry_as_rate, geometry_mean_rate, inner_product_geometry_rates,
    kmt_residual_as_rate, kmt_residual_mean_rate, relative_rates, relative_rates_as,
    summed_mean_to_as, x_ar_rates, y_ar_rates, ArInputs, AsRate, FastBound, FastCase, MeanRate,
    RateError,
};
use halpern_core::scheme::{Quantity, SchemeKind};
use halpern_core::space::NormKind;
use std::sync::Arc;

use crate::desk::DeskCase;

/// All rates instantiated for one configuration.
#[derive(Debug, Default)]
pub struct RateSheet {
    pub mean_rates: Vec<(Quantity, MeanRate)>,
    pub as_rates: Vec<(Quantity, AsRate)>,
    pub fast_bounds: Vec<FastBound>,
    /// `(construction, reason)` for everything that could not be built.
    pub skipped: Vec<(String, String)>,
}

/// True when the model certifies a `K/(n+2)^2` mean decay (the linear-bound
/// hypothesis).
fn quadratic_decay_certified(m: &NoiseModel) -> bool {
    matches!(
        m,
        NoiseModel::Zero | NoiseModel::GaussianDecay { .. } | NoiseModel::MinibatchSurrogate { .. }
    )
}

/// Analytic absolute-continuity modulus for the summed noise norms, from the
/// L2 envelope of the sum: `E[Y 1_A] <= ||Y||_2 sqrt(P(A))` gives
/// `mu(eps) = (eps / S)^2` for `S >= ||sum ||xi_n|| ||_2`.
fn noise_abs_continuity(
    m: &NoiseModel,
    dim: usize,
    kind: NormKind,
) -> Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
    let s = noise_l2_sum_bound(m, dim, kind);
    if s == 0.0 {
        return None; // no noise: the term drops out of the minimum
    }
    Some(Arc::new(move |eps| (eps / s) * (eps / s)))
}

/// Upper bound on the L2 norm of `sum_n ||xi_n||`, by L2 triangle inequality
/// over per-step envelopes.
fn noise_l2_sum_bound(m: &NoiseModel, dim: usize, kind: NormKind) -> f64 {
    match m {
        NoiseModel::Zero => 0.0,
        NoiseModel::GaussianDecay { k1 } => {
            // per step: ||xi_n||_{L2} = scale_n * sqrt(E ||Z||^2) with
            // scale_n = bound_n / mean_norm_constant
            let c = match kind {
                NormKind::Euclidean | NormKind::Sup => {
                    halpern_core::math::gaussian_mean_norm_euclidean(dim)
                }
                NormKind::L1 => halpern_core::math::gaussian_mean_norm_l1(dim),
            };
            let g2 = match kind {
                // E||Z||_2^2 = d; sup is dominated by the Euclidean norm
                NormKind::Euclidean | NormKind::Sup => (dim as f64).sqrt(),
                // (sum |z_i|)^2 <= d sum z_i^2
                NormKind::L1 => dim as f64,
            };
            // sum_n bound_n = k1 * (pi^2/6 - 1)
            k1 * (std::f64::consts::PI.powi(2) / 6.0 - 1.0) * g2 / c
        }
        // deterministic norms: L2 norm equals the budget
        NoiseModel::BoundedAdversarial { .. } => m.sum_bound(),
        // single-coordinate mean of s_n samples: ||xi_n||_{L2} <= sigma/sqrt(s_n)
        NoiseModel::MinibatchSurrogate { k1, .. } => *k1,
    }
}

/// Builds the full sheet for a desk case.
pub fn build_rate_sheet(case: &DeskCase) -> Result<RateSheet, RateError> {
    let mut sheet = RateSheet::default();
    let cfg = &case.config;
    let kind = cfg.kind();
    let k0 = case.hyp.k0;

    // displacement rates
    let inputs = ArInputs::assemble(&cfg.alpha, &cfg.beta, &cfg.xi, &cfg.delta, k0)?;
    let (x_mean, x_as) = x_ar_rates(&inputs)?;
    let (y_mean, y_as) = y_ar_rates(&inputs)?;
    sheet.mean_rates.push((Quantity::Dx, x_mean.clone()));
    sheet.as_rates.push((Quantity::Dx, x_as.clone()));
    sheet.mean_rates.push((Quantity::Dy, y_mean.clone()));
    sheet.as_rates.push((Quantity::Dy, y_as.clone()));

    // pointwise rates feeding the relative residuals
    let rho_alpha = match cfg.alpha.rate_to_zero() {
        Some(chi) => MeanRate::from_modulus("alpha-to-zero", chi),
        None => {
            sheet.skipped.push((
                "relative residual rates".into(),
                "alpha schedule does not converge to zero".into(),
            ));
            return Ok(sheet);
        }
    };
    let rho_xi = MeanRate::from_modulus("xi-mean-to-zero", cfg.xi.rate_to_zero());
    let rho_delta = MeanRate::from_modulus("delta-mean-to-zero", cfg.delta.rate_to_zero());
    let xi_as = summed_mean_to_as("xi-as", cfg.xi.sum_modulus());
    let delta_as = summed_mean_to_as("delta-as", cfg.delta.sum_modulus());

    // residual rate relative to U for the y-sequence, by scheme shape
    let band = cfg.beta.band().map(|(lo, hi)| lo.min(1.0 - hi));
    let (ruy_mean, ruy_as): (Option<MeanRate>, Option<AsRate>) = match kind {
        SchemeKind::Halpern => (Some(MeanRate::zero("uy-identity")), Some(AsRate::zero("uy-identity"))),
        SchemeKind::KmTikhonov => {
            let lambda_band = band.filter(|l| *l > 0.0);
            match lambda_band {
                Some(lb) => {
                    let mean =
                        kmt_residual_mean_rate(lb, k0, &y_mean, &rho_alpha, &rho_delta)?;
                    let as_rate = if case.hyp.pathwise {
                        Some(kmt_residual_as_rate(lb, k0, &y_as, &rho_alpha, &delta_as)?)
                    } else {
                        sheet.skipped.push((
                            "uy-residual-kmt-as".into(),
                            "no pathwise domination certificate (declared fixed point)".into(),
                        ));
                        None
                    };
                    (Some(mean), as_rate)
                }
                None => {
                    sheet.skipped.push((
                        "uy-residual-kmt".into(),
                        "beta schedule is not bounded inside (0, 1)".into(),
                    ));
                    (None, None)
                }
            }
        }
        SchemeKind::General => build_geometry_ruy(case, &mut sheet, &x_mean, &x_as, &rho_alpha)?,
    };

    if let (Some(ruy_m), Some(ruy_a)) = (&ruy_mean, &ruy_as) {
        sheet.mean_rates.push((Quantity::RUy, ruy_m.clone()));
        sheet.as_rates.push((Quantity::RUy, ruy_a.clone()));
    } else if let Some(ruy_m) = &ruy_mean {
        sheet.mean_rates.push((Quantity::RUy, ruy_m.clone()));
    }

    // residuals relative to both mappings
    if let Some(ruy_m) = &ruy_mean {
        let rel = relative_rates(ruy_m, &rho_xi, &rho_delta, &rho_alpha, &x_mean, k0)?;
        sheet.mean_rates.push((Quantity::Xy, rel.xy));
        sheet.mean_rates.push((Quantity::RTy, rel.r_ty));
        sheet.mean_rates.push((Quantity::RUx, rel.r_ux));
        sheet.mean_rates.push((Quantity::RTx, rel.r_tx));
    }
    if let Some(ruy_a) = &ruy_as {
        if case.hyp.pathwise {
            let rel = relative_rates_as(ruy_a, &rho_alpha, &xi_as, &delta_as, &x_as, k0)?;
            sheet.as_rates.push((Quantity::Xy, rel.xy));
            sheet.as_rates.push((Quantity::RTy, rel.r_ty));
            sheet.as_rates.push((Quantity::RUx, rel.r_ux));
            sheet.as_rates.push((Quantity::RTx, rel.r_tx));
        } else {
            sheet.skipped.push((
                "relative residual as-rates".into(),
                "no pathwise domination certificate (declared fixed point)".into(),
            ));
        }
    }

    // linear-decay bounds under quadratic noise certificates
    if quadratic_decay_certified(&cfg.xi) && quadratic_decay_certified(&cfg.delta) {
        sheet.fast_bounds.push(fast_bounds(FastCase::Dx, k0, case.k1, case.k2, None)?);
        sheet.fast_bounds.push(fast_bounds(FastCase::Dy, k0, case.k1, case.k2, None)?);
        match kind {
            SchemeKind::Halpern => {
                sheet
                    .fast_bounds
                    .push(fast_bounds(FastCase::HalpernResidual, k0, case.k1, 0.0, None)?);
            }
            SchemeKind::KmTikhonov => {
                if let Some((lo, hi)) = cfg.beta.band() {
                    if hi < 1.0 && lo > 0.0 {
                        let b = 1.0 / (1.0 - hi);
                        sheet.fast_bounds.push(fast_bounds(
                            FastCase::KmtResidual,
                            k0,
                            0.0,
                            case.k2,
                            Some(b),
                        )?);
                    }
                }
            }
            SchemeKind::General => {}
        }
    } else {
        sheet.skipped.push((
            "linear-decay bounds".into(),
            "noise model does not certify a quadratic mean decay".into(),
        ));
    }

    Ok(sheet)
}

/// Geometry route for the `||U y_n - y_n||` rates in the general case.
fn build_geometry_ruy(
    case: &DeskCase,
    sheet: &mut RateSheet,
    x_mean: &MeanRate,
    x_as: &AsRate,
    rho_alpha: &MeanRate,
) -> Result<(Option<MeanRate>, Option<AsRate>), RateError> {
    let cfg = &case.config;
    if cfg.norm != NormKind::Euclidean {
        sheet.skipped.push((
            "uy-residual-geometry".into(),
            format!("geometry rates need the euclidean norm (or a convexity modulus), got {}", cfg.norm),
        ));
        return Ok((None, None));
    }
    if !case.hyp.pathwise {
        sheet.skipped.push((
            "uy-residual-geometry".into(),
            "no pathwise domination certificate (declared fixed point)".into(),
        ));
        return Ok((None, None));
    }
    let band = cfg.beta.band().map(|(lo, hi)| lo.min(1.0 - hi)).filter(|l| *l > 0.0);
    let lambda_band = match band {
        Some(l) => l,
        None => {
            sheet.skipped.push((
                "uy-residual-geometry".into(),
                "beta schedule is not bounded inside (0, 1)".into(),
            ));
            return Ok((None, None));
        }
    };
    let modulus = UcModulus::inner_product();
    let chi1 = cfg.xi.sum_modulus();
    let chi2 = cfg.delta.sum_modulus();
    let as_rate = geometry_as_rate(
        &modulus,
        case.hyp.k0,
        lambda_band,
        x_as,
        rho_alpha,
        chi1.clone(),
        chi2.clone(),
        true,
    )?;
    let mu = residual_ui_modulus(case)?;
    let mean_rate = geometry_mean_rate(
        &modulus,
        case.hyp.k0,
        lambda_band,
        x_mean,
        rho_alpha,
        chi1,
        chi2,
        &mu,
        true,
    )?;

    // power-type instantiation gives additional (typically far larger but
    // closed-form) rates for the residuals relative to both mappings
    let ip = inner_product_geometry_rates(case.hyp.k0, case.k1, case.k2, lambda_band, Some(&mu))?;
    sheet.as_rates.push((Quantity::RUx, ip.r_ux_as));
    sheet.as_rates.push((Quantity::RTx, ip.r_tx_as));
    if let (Some(ux), Some(tx)) = (ip.r_ux_mean, ip.r_tx_mean) {
        sheet.mean_rates.push((Quantity::RUx, ux));
        sheet.mean_rates.push((Quantity::RTx, tx));
    }

    Ok((Some(mean_rate), Some(as_rate)))
}

/// Uniform-integrability modulus for the residual sequence via the
/// error-sums route (constant anchor and start).
pub fn residual_ui_modulus(case: &DeskCase) -> Result<UiModulus, RateError> {
    let cfg = &case.config;
    let dim = cfg.dim();
    let mu1 = noise_abs_continuity(&cfg.xi, dim, cfg.norm);
    let mu2 = noise_abs_continuity(&cfg.delta, dim, cfg.norm);
    let k = if case.k_point > 0.0 { case.k_point } else { 1.0 };
    ui_from_error_sums(k, mu1, mu2)
        .map_err(|e| RateError::InvalidConstant(format!("integrability modulus: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desk;

    #[test]
    fn sheets_build_for_the_standard_suite() {
        for case in desk::standard_suite() {
            let sheet = build_rate_sheet(&case).unwrap_or_else(|e| panic!("{}: {e}", case.name));
            assert!(
                sheet.mean_rates.iter().any(|(q, _)| *q == Quantity::Dx),
                "{} lacks a dx rate",
                case.name
            );
            assert!(
                sheet.as_rates.iter().any(|(q, _)| *q == Quantity::Dx),
                "{} lacks a dx as-rate",
                case.name
            );
            assert!(!sheet.fast_bounds.is_empty(), "{} lacks linear bounds", case.name);
        }
    }

    #[test]
    fn halpern_sheet_has_zero_uy_rate_and_halpern_bound() {
        let sheet = build_rate_sheet(&desk::rotation_halpern(1.0)).unwrap();
        let (_, ruy) = sheet
            .mean_rates
            .iter()
            .find(|(q, _)| *q == Quantity::RUy)
            .expect("uy rate present");
        assert_eq!(ruy.index(0.3).unwrap(), 0);
        assert!(sheet
            .fast_bounds
            .iter()
            .any(|fb| fb.case() == FastCase::HalpernResidual));
    }

    #[test]
    fn kmt_sheet_builds_kappa_and_bound() {
        let sheet = build_rate_sheet(&desk::projection_kmt(1.0)).unwrap();
        assert!(sheet.mean_rates.iter().any(|(q, r)| *q == Quantity::RUy
            && r.origin() == "uy-residual-kmt-mean"));
        assert!(sheet.fast_bounds.iter().any(|fb| fb.case() == FastCase::KmtResidual));
    }

    #[test]
    fn general_sheet_builds_geometry_rates() {
        let sheet = build_rate_sheet(&desk::two_halfspaces(0.5, 0.5)).unwrap();
        assert!(sheet
            .as_rates
            .iter()
            .any(|(q, r)| *q == Quantity::RUy && r.origin() == "uy-residual-geometry-as"));
        assert!(sheet
            .mean_rates
            .iter()
            .any(|(q, r)| *q == Quantity::RUy && r.origin() == "uy-residual-geometry-mean"));
        // the sup-norm variant would skip instead
        let mut case = desk::two_halfspaces(0.0, 0.0);
        case.config.norm = NormKind::Sup;
        let sheet = build_rate_sheet(&case).unwrap();
        assert!(sheet.skipped.iter().any(|(name, _)| name.contains("geometry")));
    }
}
