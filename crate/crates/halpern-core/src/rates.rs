//! Executable convergence-rate constructions.
//!
//! A [`MeanRate`] maps a tolerance to an index beyond which an expected
//! quantity stays below it; an [`AsRate`] additionally takes a confidence
//! budget and controls the tail event `exists n >= N with X_n >= eps`.
//! A [`FastBound`] carries a linear-decay constant `L` with the paired bound
//! forms `2L/(n+2)` in mean and `4L/(eps (n+2))` in tail probability.
//!
//! Every constructor here is a pure composition of the moduli it consumes;
//! indices come from ceilings of the real-valued formulas, which preserves
//! the defining properties. Constants are recorded on the rate objects so
//! reports can state exactly what was assembled.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{UcModulus, UiModulus};
use crate::math;
use crate::noise::NoiseModel;
use crate::schedule::{ChiFn, Schedule, ThetaFn};

pub type RateFn1 = Arc<dyn Fn(f64) -> u64 + Send + Sync>;
pub type RateFn2 = Arc<dyn Fn(f64, f64) -> u64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum RateError {
    /// Tolerance or confidence argument must be a positive finite real.
    BadArgument(String),
    /// A hypothesis modulus needed by the construction was not supplied.
    MissingModulus(&'static str),
    /// The construction is pinned to a specific schedule shape.
    UnsupportedSchedule(&'static str),
    /// Constants contradict the construction's preconditions.
    InvalidConstant(String),
    /// Noise or schedule certificates do not fit the requested case.
    CertificateMismatch(String),
}

impl fmt::Display for RateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateError::BadArgument(msg) => write!(f, "bad rate argument: {msg}"),
            RateError::MissingModulus(which) => write!(f, "missing modulus: {which}"),
            RateError::UnsupportedSchedule(which) => {
                write!(f, "construction requires the anchored 2/(n+2) schedule: {which}")
            }
            RateError::InvalidConstant(msg) => write!(f, "invalid constant: {msg}"),
            RateError::CertificateMismatch(msg) => write!(f, "certificate mismatch: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RateError {}

fn check_positive(name: &str, v: f64) -> Result<(), RateError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(RateError::BadArgument(format!("{name} = {v}")));
    }
    Ok(())
}

/// Rate of convergence in mean: `E[X_n] < eps` for all `n >= index(eps)`.
#[derive(Clone)]
pub struct MeanRate {
    f: RateFn1,
    origin: &'static str,
    constants: Vec<(&'static str, f64)>,
}

impl fmt::Debug for MeanRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeanRate")
            .field("origin", &self.origin)
            .field("constants", &self.constants)
            .finish()
    }
}

impl MeanRate {
    pub fn new(origin: &'static str, constants: Vec<(&'static str, f64)>, f: RateFn1) -> Self {
        Self { f, origin, constants }
    }

    /// The always-zero rate, for quantities that vanish identically.
    pub fn zero(origin: &'static str) -> Self {
        Self::new(origin, vec![], Arc::new(|_| 0))
    }

    /// Wraps a convergence modulus as a rate object.
    pub fn from_modulus(origin: &'static str, chi: ChiFn) -> Self {
        Self::new(origin, vec![], Arc::new(move |eps| chi(eps)))
    }

    pub fn index(&self, eps: f64) -> Result<u64, RateError> {
        check_positive("eps", eps)?;
        Ok((self.f)(eps))
    }

    pub fn origin(&self) -> &'static str {
        self.origin
    }

    pub fn constants(&self) -> &[(&'static str, f64)] {
        &self.constants
    }

    /// Raw evaluation closure, for composition into derived rates.
    pub fn raw(&self) -> RateFn1 {
        self.f.clone()
    }
}

/// Rate of almost-sure convergence:
/// `P(exists n >= index(lambda, eps) with X_n >= eps) < lambda`.
#[derive(Clone)]
pub struct AsRate {
    f: RateFn2,
    origin: &'static str,
    constants: Vec<(&'static str, f64)>,
}

impl fmt::Debug for AsRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsRate")
            .field("origin", &self.origin)
            .field("constants", &self.constants)
            .finish()
    }
}

impl AsRate {
    pub fn new(origin: &'static str, constants: Vec<(&'static str, f64)>, f: RateFn2) -> Self {
        Self { f, origin, constants }
    }

    pub fn zero(origin: &'static str) -> Self {
        Self::new(origin, vec![], Arc::new(|_, _| 0))
    }

    pub fn index(&self, lambda: f64, eps: f64) -> Result<u64, RateError> {
        check_positive("lambda", lambda)?;
        check_positive("eps", eps)?;
        Ok((self.f)(lambda, eps))
    }

    pub fn origin(&self) -> &'static str {
        self.origin
    }

    pub fn constants(&self) -> &[(&'static str, f64)] {
        &self.constants
    }

    pub fn raw(&self) -> RateFn2 {
        self.f.clone()
    }
}

// --- recursive-inequality rates ----------------------------------------------

/// Rate for `s_{n+1} <= (1 - a_n) s_n + c_n` with `s_n <= K`, divergence
/// modulus `theta` for the `a_n` series and convergence modulus `chi` for the
/// `c_n` series: `eps -> theta(chi(eps/2), ln(2K/eps)) + 1`.
pub fn xu_rate(k: f64, theta: ThetaFn, chi: ChiFn) -> Result<MeanRate, RateError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(RateError::InvalidConstant(format!("bound K must be positive, got {k}")));
    }
    let f: RateFn1 = Arc::new(move |eps| {
        let b = math::ln(2.0 * k / eps);
        theta(chi(eps / 2.0), b).saturating_add(1)
    });
    Ok(MeanRate::new("recursive-mean", vec![("K", k)], f))
}

/// Stochastic counterpart: the same mean rate, plus the almost-sure rate
/// `(lambda, eps) -> phi(lambda eps / 2)`.
pub fn stochastic_xu_rates(
    k: f64,
    theta: ThetaFn,
    chi: ChiFn,
) -> Result<(MeanRate, AsRate), RateError> {
    let mean = xu_rate(k, theta, chi)?;
    let phi = mean.raw();
    let as_rate = AsRate::new(
        "recursive-as",
        vec![("K", k)],
        Arc::new(move |lambda, eps| phi(lambda * eps / 2.0)),
    );
    Ok((mean, as_rate))
}

/// Mean-to-almost-sure transfer for almost-monotone processes
/// (`X_{n+1} <= X_n + C_n`): `psi(lambda, eps) = max(phi(lambda eps / 2),
/// chi(lambda eps / 2))` where `chi` controls `sum E[C_n]`.
///
/// The almost-monotonicity hypothesis is the caller's responsibility.
pub fn mean_to_as_transfer(phi: &MeanRate, chi: ChiFn) -> AsRate {
    let phi = phi.raw();
    AsRate::new(
        "mean-to-as",
        vec![],
        Arc::new(move |lambda, eps| {
            let arg = lambda * eps / 2.0;
            phi(arg).max(chi(arg))
        }),
    )
}

/// Almost-sure rate from a summable mean series: if `sum E[X_n] < infinity`
/// with modulus `chi`, then `(lambda, eps) -> chi(lambda eps)`.
pub fn summed_mean_to_as(origin: &'static str, chi: ChiFn) -> AsRate {
    AsRate::new(origin, vec![], Arc::new(move |lambda, eps| chi(lambda * eps)))
}

// --- displacement rates -------------------------------------------------------

/// Everything the displacement-rate constructions consume, bundled.
pub struct ArInputs {
    pub k0: f64,
    /// sup bound on `E ||xi_n||`
    pub e0: f64,
    /// sup bound on `E ||delta_n||`
    pub d0: f64,
    /// modulus for `sum E ||xi_{n+1} - xi_n||`
    pub chi1: ChiFn,
    /// modulus for `sum E ||delta_{n+1} - delta_n||`
    pub chi2: ChiFn,
    /// modulus for `sum |alpha_{n+1} - alpha_n|`
    pub chi3: ChiFn,
    /// modulus for `sum |beta_{n+1} - beta_n|`
    pub chi4: ChiFn,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    /// divergence modulus for `sum alpha_n`
    pub theta: ThetaFn,
}

impl ArInputs {
    /// Gathers the moduli from schedules and noise models. Errors name the
    /// certificate that is unavailable.
    pub fn assemble(
        alpha: &Schedule,
        beta: &Schedule,
        xi: &NoiseModel,
        delta: &NoiseModel,
        k0: f64,
    ) -> Result<Self, RateError> {
        if !(k0.is_finite() && k0 >= 0.0) {
            return Err(RateError::InvalidConstant(format!("K0 = {k0}")));
        }
        let theta = alpha
            .divergence_modulus()
            .map_err(|_| RateError::MissingModulus("divergence modulus for the alpha series"))?;
        let (chi3, b3) = alpha
            .variation_modulus()
            .map_err(|_| RateError::MissingModulus("variation modulus for the alpha schedule"))?;
        let (chi4, b4) = beta
            .variation_modulus()
            .map_err(|_| RateError::MissingModulus("variation modulus for the beta schedule"))?;
        Ok(ArInputs {
            k0,
            e0: xi.sup_mean_bound(),
            d0: delta.sup_mean_bound(),
            chi1: xi.diff_sum_modulus(),
            chi2: delta.diff_sum_modulus(),
            chi3,
            chi4,
            b1: xi.diff_sum_bound(),
            b2: delta.diff_sum_bound(),
            b3,
            b4,
            theta,
        })
    }

    /// Composite modulus controlling the summed per-step error
    /// `E[c_n] <= E||xi_{n+1}-xi_n|| + E||delta_{n+1}-delta_n||
    ///  + |alpha_{n+1}-alpha_n| (K0+E0) + |beta_{n+1}-beta_n| (K0+D0)`.
    fn composite_chi(&self) -> ChiFn {
        let (chi1, chi2, chi3, chi4) =
            (self.chi1.clone(), self.chi2.clone(), self.chi3.clone(), self.chi4.clone());
        let ek = self.e0 + self.k0;
        let dk = self.d0 + self.k0;
        Arc::new(move |eps| {
            let mut idx = chi1(eps / 4.0).max(chi2(eps / 4.0));
            if ek > 0.0 {
                idx = idx.max(chi3(eps / (4.0 * ek)));
            }
            if dk > 0.0 {
                idx = idx.max(chi4(eps / (4.0 * dk)));
            }
            idx
        })
    }

    /// `B = B1 + B2 + B3 (E0+K0) + B4 (D0+K0)`, the total-error bound.
    fn error_sum_bound(&self) -> f64 {
        self.b1 + self.b2 + self.b3 * (self.e0 + self.k0) + self.b4 * (self.d0 + self.k0)
    }

    /// `K = 2 K0 + E0 + D0 + B`, the displacement envelope.
    fn displacement_bound(&self) -> f64 {
        2.0 * self.k0 + self.e0 + self.d0 + self.error_sum_bound()
    }
}

/// Rates for the step displacement `||x_{n+1} - x_n||`, in mean and almost
/// surely.
pub fn x_ar_rates(inputs: &ArInputs) -> Result<(MeanRate, AsRate), RateError> {
    let chi = inputs.composite_chi();
    let k = inputs.displacement_bound();
    if k == 0.0 {
        // the displacement envelope vanishes: the process is identically zero
        return Ok((
            MeanRate::zero("x-displacement-mean"),
            AsRate::zero("x-displacement-as"),
        ));
    }
    let (mean, as_rate) = stochastic_xu_rates(k, inputs.theta.clone(), chi)?;
    let consts = vec![
        ("K0", inputs.k0),
        ("E0", inputs.e0),
        ("D0", inputs.d0),
        ("B", inputs.error_sum_bound()),
        ("K", k),
    ];
    Ok((
        MeanRate::new("x-displacement-mean", consts.clone(), mean.raw()),
        AsRate::new("x-displacement-as", consts, as_rate.raw()),
    ))
}

/// Rates for the companion displacement `||y_{n+1} - y_n||`.
pub fn y_ar_rates(inputs: &ArInputs) -> Result<(MeanRate, AsRate), RateError> {
    let (x_mean, _) = x_ar_rates(inputs)?;
    let phi = x_mean.raw();
    let chi1 = inputs.chi1.clone();
    let chi3 = inputs.chi3.clone();
    let ek = inputs.k0 + inputs.e0;
    let mean_f: RateFn1 = Arc::new(move |eps| {
        let mut idx = phi(eps / 3.0).max(chi1(eps / 3.0));
        if ek > 0.0 {
            idx = idx.max(chi3(eps / (3.0 * ek)));
        }
        idx
    });
    let consts = vec![("K0", inputs.k0), ("E0", inputs.e0), ("D0", inputs.d0)];
    let mean = MeanRate::new("y-displacement-mean", consts.clone(), mean_f);

    let chi = inputs.composite_chi();
    let phi_y = mean.raw();
    let as_f: RateFn2 = Arc::new(move |lambda, eps| {
        let arg = lambda * eps / 2.0;
        phi_y(arg).max(chi(arg))
    });
    Ok((mean, AsRate::new("y-displacement-as", consts, as_f)))
}

// --- rates relative to the mappings ------------------------------------------

/// Mean rates for the four relative residuals, from a rate for
/// `E||U y_n - y_n||`, pointwise rates for the noise means and `alpha`, and a
/// rate for the step displacement.
pub struct RelativeMeanRates {
    /// `||x_n - y_n||`
    pub xy: MeanRate,
    /// `||T y_n - y_n||`
    pub r_ty: MeanRate,
    /// `||U x_n - x_n||`
    pub r_ux: MeanRate,
    /// `||T x_n - x_n||`
    pub r_tx: MeanRate,
}

pub fn relative_rates(
    phi_ruy: &MeanRate,
    rho1_xi: &MeanRate,
    rho2_delta: &MeanRate,
    rho3_alpha: &MeanRate,
    phi0_dx: &MeanRate,
    k0: f64,
) -> Result<RelativeMeanRates, RateError> {
    if !(k0.is_finite() && k0 >= 0.0) {
        return Err(RateError::InvalidConstant(format!("K0 = {k0}")));
    }
    let consts = vec![("K0", k0)];

    let (phi, rho1, rho2, rho3, phi0) =
        (phi_ruy.raw(), rho1_xi.raw(), rho2_delta.raw(), rho3_alpha.raw(), phi0_dx.raw());

    let phi_c = phi.clone();
    let phi0_c = phi0.clone();
    let rho2_c = rho2.clone();
    let xy_f: RateFn1 =
        Arc::new(move |eps| phi0_c(eps / 3.0).max(phi_c(eps / 3.0)).max(rho2_c(eps / 3.0)));
    let xy = MeanRate::new("xy-gap-mean", consts.clone(), xy_f);

    let xy_raw = xy.raw();
    let rho1_c = rho1.clone();
    let rho3_c = rho3.clone();
    let ty_f: RateFn1 = Arc::new(move |eps| {
        let mut idx = xy_raw(eps / 3.0).max(rho1_c(eps / 3.0));
        if k0 > 0.0 {
            idx = idx.max(rho3_c(eps / (3.0 * k0)));
        }
        idx
    });
    let r_ty = MeanRate::new("ty-residual-mean", consts.clone(), ty_f);

    let xy_raw2 = xy.raw();
    let phi_c2 = phi.clone();
    let ux_f: RateFn1 = Arc::new(move |eps| xy_raw2(eps / 3.0).max(phi_c2(eps / 3.0)));
    let r_ux = MeanRate::new("ux-residual-mean", consts.clone(), ux_f);

    let xy_raw3 = xy.raw();
    let ty_raw = r_ty.raw();
    let tx_f: RateFn1 = Arc::new(move |eps| xy_raw3(eps / 3.0).max(ty_raw(eps / 3.0)));
    let r_tx = MeanRate::new("tx-residual-mean", consts, tx_f);

    Ok(RelativeMeanRates { xy, r_ty, r_ux, r_tx })
}

/// Almost-sure counterparts. Requires a pathwise domination certificate
/// (constant `k0` bounding the dominating variable's mean), which the caller
/// obtains from a declared common fixed point.
pub struct RelativeAsRates {
    pub xy: AsRate,
    pub r_ty: AsRate,
    pub r_ux: AsRate,
    pub r_tx: AsRate,
}

pub fn relative_rates_as(
    psi_ruy: &AsRate,
    rho_alpha: &MeanRate,
    phi1_xi: &AsRate,
    phi2_delta: &AsRate,
    psi0_dx: &AsRate,
    k0: f64,
) -> Result<RelativeAsRates, RateError> {
    if !(k0.is_finite() && k0 >= 0.0) {
        return Err(RateError::CertificateMismatch(format!(
            "pathwise domination certificate required (nonnegative K0), got {k0}"
        )));
    }
    let consts = vec![("K0", k0)];
    let (psi, rho, phi1, phi2, psi0) =
        (psi_ruy.raw(), rho_alpha.raw(), phi1_xi.raw(), phi2_delta.raw(), psi0_dx.raw());

    let (psi_c, psi0_c, phi2_c) = (psi.clone(), psi0.clone(), phi2.clone());
    let xy_f: RateFn2 = Arc::new(move |lambda, eps| {
        psi0_c(lambda / 3.0, eps / 3.0)
            .max(psi_c(lambda / 3.0, eps / 3.0))
            .max(phi2_c(lambda / 3.0, eps / 3.0))
    });
    let xy = AsRate::new("xy-gap-as", consts.clone(), xy_f);

    let xy_raw = xy.raw();
    let (rho_c, phi1_c) = (rho.clone(), phi1.clone());
    let ty_f: RateFn2 = Arc::new(move |lambda, eps| {
        let mut idx =
            xy_raw(lambda / 3.0, eps / 3.0).max(phi1_c(lambda / 3.0, eps / 3.0));
        // the anchored drive vanishes when the dominating variable does
        if k0 > 0.0 {
            idx = idx.max(rho_c(eps * lambda / (9.0 * k0)));
        }
        idx
    });
    let r_ty = AsRate::new("ty-residual-as", consts.clone(), ty_f);

    let xy_raw2 = xy.raw();
    let psi_c2 = psi.clone();
    let ux_f: RateFn2 = Arc::new(move |lambda, eps| {
        xy_raw2(lambda / 2.0, eps / 3.0).max(psi_c2(lambda / 2.0, eps / 3.0))
    });
    let r_ux = AsRate::new("ux-residual-as", consts.clone(), ux_f);

    let xy_raw3 = xy.raw();
    let ty_raw = r_ty.raw();
    let tx_f: RateFn2 = Arc::new(move |lambda, eps| {
        xy_raw3(lambda / 2.0, eps / 3.0).max(ty_raw(lambda / 2.0, eps / 3.0))
    });
    let r_tx = AsRate::new("tx-residual-as", consts, tx_f);

    Ok(RelativeAsRates { xy, r_ty, r_ux, r_tx })
}

// --- averaged/Tikhonov residual rates ----------------------------------------

/// Mean rate for `||U y_n - y_n||` in the averaged/Tikhonov case, from a rate
/// `phi` for the y-displacement, a pointwise rate `rho` for `alpha`, and a
/// rate `chi` for `E||delta_n||`, under the band `0 < Lambda <= beta_n <= 1 - Lambda`:
/// `kappa(eps) = max(phi(L eps/4), rho(L eps/4 K0), chi(L eps/4)) + 1`.
pub fn kmt_residual_mean_rate(
    lambda_band: f64,
    k0: f64,
    phi_dy: &MeanRate,
    rho_alpha: &MeanRate,
    chi_delta: &MeanRate,
) -> Result<MeanRate, RateError> {
    check_band(lambda_band)?;
    let (phi, rho, chi) = (phi_dy.raw(), rho_alpha.raw(), chi_delta.raw());
    let f: RateFn1 = Arc::new(move |eps| {
        let scaled = lambda_band * eps / 4.0;
        let mut idx = phi(scaled).max(chi(scaled));
        if k0 > 0.0 {
            idx = idx.max(rho(scaled / k0));
        }
        idx.saturating_add(1)
    });
    Ok(MeanRate::new("uy-residual-kmt-mean", vec![("Lambda", lambda_band), ("K0", k0)], f))
}

/// Almost-sure companion:
/// `zeta(lambda, eps) = max(psi(lambda/3, L eps/4), rho(L lambda eps/4 K0),
/// phi(lambda/3, L eps/4)) + 1`.
pub fn kmt_residual_as_rate(
    lambda_band: f64,
    k0: f64,
    psi_dy: &AsRate,
    rho_alpha: &MeanRate,
    phi_delta: &AsRate,
) -> Result<AsRate, RateError> {
    check_band(lambda_band)?;
    if !(k0.is_finite() && k0 >= 0.0) {
        return Err(RateError::CertificateMismatch(format!(
            "pathwise domination certificate required (nonnegative K0), got {k0}"
        )));
    }
    let (psi, rho, phi) = (psi_dy.raw(), rho_alpha.raw(), phi_delta.raw());
    let f: RateFn2 = Arc::new(move |lambda, eps| {
        let scaled = lambda_band * eps / 4.0;
        let mut idx = psi(lambda / 3.0, scaled).max(phi(lambda / 3.0, scaled));
        if k0 > 0.0 {
            idx = idx.max(rho(lambda_band * lambda * eps / (4.0 * k0)));
        }
        idx.saturating_add(1)
    });
    Ok(AsRate::new("uy-residual-kmt-as", vec![("Lambda", lambda_band), ("K0", k0)], f))
}

fn check_band(lambda_band: f64) -> Result<(), RateError> {
    if !(lambda_band.is_finite() && lambda_band > 0.0 && lambda_band <= 0.5) {
        return Err(RateError::InvalidConstant(format!(
            "band Lambda must satisfy 0 < Lambda <= 1/2, got {lambda_band}"
        )));
    }
    Ok(())
}

// --- linear-decay closed forms -------------------------------------------------

/// Which quantity a [`FastBound`] covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FastCase {
    /// `||x_{n+1} - x_n||`
    Dx,
    /// `||y_{n+1} - y_n||`
    Dy,
    /// `||T x_n - x_n||` in the anchored case (`U = Id`, `delta = 0`)
    HalpernResidual,
    /// `||U x_n - x_n||` in the averaged/Tikhonov case (`T = Id`, `xi = 0`)
    KmtResidual,
    /// abstract recursion bound
    Recursion,
}

impl FastCase {
    pub fn name(&self) -> &'static str {
        match self {
            FastCase::Dx => "dx",
            FastCase::Dy => "dy",
            FastCase::HalpernResidual => "halpern_residual",
            FastCase::KmtResidual => "kmt_residual",
            FastCase::Recursion => "recursion",
        }
    }
}

/// Linear-decay bound pair: `E[X_n] <= 2L/(n+2)` and
/// `P(exists i >= n with X_i >= eps) <= 4L/(eps (n+2))`, valid for
/// `n >= valid_from`.
#[derive(Clone, Debug)]
pub struct FastBound {
    case: FastCase,
    l: f64,
    valid_from: u64,
    constants: Vec<(&'static str, f64)>,
}

impl FastBound {
    pub fn case(&self) -> FastCase {
        self.case
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn valid_from(&self) -> u64 {
        self.valid_from
    }

    pub fn constants(&self) -> &[(&'static str, f64)] {
        &self.constants
    }

    pub fn mean_bound(&self, n: u64) -> f64 {
        2.0 * self.l / (n as f64 + 2.0)
    }

    pub fn tail_bound(&self, eps: f64, n: u64) -> f64 {
        4.0 * self.l / (eps * (n as f64 + 2.0))
    }

    /// Mean rate induced by the bound: `2L/(n+2) < eps`.
    pub fn mean_rate(&self) -> MeanRate {
        let l = self.l;
        let from = self.valid_from;
        MeanRate::new(
            "fast-mean",
            vec![("L", l)],
            Arc::new(move |eps| math::ceil_index(2.0 * l / eps).max(from)),
        )
    }

    /// Almost-sure rate induced by the tail bound: `4L/(eps lambda) <= n+2`.
    pub fn as_rate(&self) -> AsRate {
        let l = self.l;
        let from = self.valid_from;
        AsRate::new(
            "fast-as",
            vec![("L", l)],
            Arc::new(move |lambda, eps| math::ceil_index(4.0 * l / (eps * lambda)).max(from)),
        )
    }
}

/// Running product `prod_{i=j}^{k} (1 - a_i)`, with the empty product 1 for
/// `j > k`.
pub fn partial_product(schedule: &Schedule, j: u64, k: u64) -> Result<f64, RateError> {
    if j > k {
        return Ok(1.0);
    }
    let mut prod = 1.0;
    for i in j..=k {
        let a = schedule
            .value(i)
            .map_err(|e| RateError::BadArgument(format!("schedule value at {i}: {e}")))?;
        prod *= 1.0 - a;
    }
    Ok(prod)
}

/// Closed-form linear bound for recursions driven by the anchored schedule:
/// if `s_{n+1} <= (1 - a_{n+1}) s_n + c_n` with `a_n = 2/(n+2)`,
/// `c_n <= (a_n - a_{n+1}) L` and `s_0 <= L`, then `s_n <= 2L/(n+2)`.
pub fn sabach_shtern_bound(schedule: &Schedule, l: f64, s0: f64) -> Result<FastBound, RateError> {
    if *schedule != Schedule::HalpernTwo {
        return Err(RateError::UnsupportedSchedule("linear-decay closed form"));
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(RateError::InvalidConstant(format!("L must be positive, got {l}")));
    }
    if s0 > l {
        return Err(RateError::InvalidConstant(format!("s0 = {s0} exceeds L = {l}")));
    }
    Ok(FastBound {
        case: FastCase::Recursion,
        l,
        valid_from: 0,
        constants: vec![("L", l), ("s0", s0)],
    })
}

/// Assembled linear-decay constants for the displacement and residual chains
/// under the anchored schedule and `K/(n+2)^2` noise-mean certificates.
///
/// The `Dx` constant `L = 2 K0 + 2 K1 + 2 K2` covers mean and tail forms
/// simultaneously. For the chained cases the coefficients come from pushing
/// the pointwise inequalities through the union bounds step by step; the
/// tail-valid constant (recorded as the headline `L`) dominates the tighter
/// mean-only constant, which is kept in `constants` as `L_mean`.
///
/// `b` is the averaging bound `B >= 1/(1 - beta)`, required for the
/// `KmtResidual` case only. `K0` is the boundedness envelope; the tail forms
/// additionally read it as the mean bound of a pathwise dominating variable.
pub fn fast_bounds(
    case: FastCase,
    k0: f64,
    k1: f64,
    k2: f64,
    b: Option<f64>,
) -> Result<FastBound, RateError> {
    for (name, v) in [("K0", k0), ("K1", k1), ("K2", k2)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(RateError::InvalidConstant(format!("{name} = {v}")));
        }
    }
    match case {
        FastCase::Dx => {
            let l = 2.0 * k0 + 2.0 * k1 + 2.0 * k2;
            Ok(FastBound {
                case,
                l,
                valid_from: 0,
                constants: vec![("K0", k0), ("K1", k1), ("K2", k2), ("L", l), ("L_mean", l)],
            })
        }
        FastCase::Dy => {
            let l_mean = 3.0 * k0 + 4.0 * k1 + 2.0 * k2;
            let l = 9.0 * k0 + 15.0 * k1 + 6.0 * k2;
            Ok(FastBound {
                case,
                l,
                valid_from: 0,
                constants: vec![("K0", k0), ("K1", k1), ("K2", k2), ("L", l), ("L_mean", l_mean)],
            })
        }
        FastCase::HalpernResidual => {
            if k2 != 0.0 {
                return Err(RateError::CertificateMismatch(
                    "anchored residual case requires delta = 0 (K2 = 0)".into(),
                ));
            }
            let l_mean = 7.0 * (k0 + k1);
            let l = 20.0 * (k0 + k1);
            Ok(FastBound {
                case,
                l,
                valid_from: 0,
                constants: vec![("K0", k0), ("K1", k1), ("L", l), ("L_mean", l_mean)],
            })
        }
        FastCase::KmtResidual => {
            if k1 != 0.0 {
                return Err(RateError::CertificateMismatch(
                    "averaged residual case requires xi = 0 (K1 = 0)".into(),
                ));
            }
            let b = b.ok_or(RateError::MissingModulus("averaging bound B >= 1/(1-beta)"))?;
            if !(b.is_finite() && b >= 1.0) {
                return Err(RateError::InvalidConstant(format!("B must be at least 1, got {b}")));
            }
            let l_mean = 4.0 * k0 + 5.0 * k2 + b * (39.0 * k0 + 27.0 * k2);
            let l = 12.0 * k0 + 15.0 * k2 + b * (990.0 * k0 + 675.0 * k2);
            Ok(FastBound {
                case,
                l,
                valid_from: 1,
                constants: vec![("K0", k0), ("K2", k2), ("B", b), ("L", l), ("L_mean", l_mean)],
            })
        }
        FastCase::Recursion => Err(RateError::CertificateMismatch(
            "use sabach_shtern_bound for the abstract recursion".into(),
        )),
    }
}

// --- geometry-driven rates -----------------------------------------------------

/// Almost-sure rate for `||U y_n - y_n||` from uniform convexity. `k_dom` is
/// the mean bound of the pathwise dominating variable (fixed-point route),
/// `delta_as` a rate for the step displacement, `rho_alpha` a pointwise rate
/// for `alpha`, `chi1`/`chi2` moduli for the summed noise means. With
/// `optimized` and a factorizable modulus the sharpened estimate is used.
pub fn geometry_as_rate(
    modulus: &UcModulus,
    k_dom: f64,
    lambda_band: f64,
    delta_as: &AsRate,
    rho_alpha: &MeanRate,
    chi1: ChiFn,
    chi2: ChiFn,
    optimized: bool,
) -> Result<AsRate, RateError> {
    check_band(lambda_band)?;
    modulus
        .validate()
        .map_err(|e| RateError::InvalidConstant(format!("convexity modulus: {e}")))?;
    if !(k_dom.is_finite() && k_dom > 0.0) {
        return Err(RateError::CertificateMismatch(format!(
            "domination constant must be positive, got {k_dom}"
        )));
    }
    let use_tilde = optimized && modulus.has_tilde();
    let modulus = modulus.clone();
    let (delta, rho) = (delta_as.raw(), rho_alpha.raw());
    let f: RateFn2 = Arc::new(move |lambda, eps| {
        let k_prime = 3.0 * k_dom / lambda;
        let arg = (eps / k_prime).min(2.0);
        let eta_val = if use_tilde { modulus.tilde(arg) } else { modulus.eta(arg) };
        let eps_hat = eps * lambda_band * lambda_band * eta_val;
        delta(lambda / 9.0, eps_hat / 4.0)
            .max(rho(eps_hat / (4.0 * k_prime)))
            .max(chi1(lambda * eps_hat / 36.0))
            .max(chi2(lambda * eps_hat / 36.0))
    });
    Ok(AsRate::new(
        "uy-residual-geometry-as",
        vec![("K", k_dom), ("Lambda", lambda_band)],
        f,
    ))
}

/// In-mean companion of [`geometry_as_rate`], using a uniform-integrability
/// modulus `mu` for the residual sequence.
pub fn geometry_mean_rate(
    modulus: &UcModulus,
    k_dom: f64,
    lambda_band: f64,
    delta_mean: &MeanRate,
    rho_alpha: &MeanRate,
    chi1: ChiFn,
    chi2: ChiFn,
    mu: &UiModulus,
    optimized: bool,
) -> Result<MeanRate, RateError> {
    check_band(lambda_band)?;
    modulus
        .validate()
        .map_err(|e| RateError::InvalidConstant(format!("convexity modulus: {e}")))?;
    if !(k_dom.is_finite() && k_dom > 0.0) {
        return Err(RateError::CertificateMismatch(format!(
            "domination constant must be positive, got {k_dom}"
        )));
    }
    let use_tilde = optimized && modulus.has_tilde();
    let modulus = modulus.clone();
    let mu = mu.clone();
    let (delta, rho) = (delta_mean.raw(), rho_alpha.raw());
    let f: RateFn1 = Arc::new(move |eps| {
        let m = mu.mu(eps / 4.0);
        if !(m.is_finite() && m > 0.0) {
            return u64::MAX;
        }
        let k_prime = 3.0 * k_dom / m;
        let arg = (eps / (2.0 * k_prime)).min(2.0);
        let eta_val = if use_tilde { modulus.tilde(arg) } else { modulus.eta(arg) };
        let eps_hat = (eps / 2.0) * lambda_band * lambda_band * eta_val;
        let eps_bar = eps_hat * m / 36.0;
        delta(eps_bar)
            .max(rho(eps_hat / (4.0 * k_prime)))
            .max(chi1(eps_bar))
            .max(chi2(eps_bar))
    });
    Ok(MeanRate::new(
        "uy-residual-geometry-mean",
        vec![("K", k_dom), ("Lambda", lambda_band)],
        f,
    ))
}

/// Power-type closed form for the geometry-driven almost-sure rate:
/// with `eta(eps) = c eps^p`, the rate collapses to
/// `ceil((3K)^{p-1} L / (c Lambda^2 eps^p lambda^p))` for `L = 144 L0`,
/// `L0 = 2K + 2K1 + 2K2`.
pub fn power_type_geometry_as_rate(
    p: f64,
    c: f64,
    k_dom: f64,
    k1: f64,
    k2: f64,
    lambda_band: f64,
) -> Result<AsRate, RateError> {
    check_band(lambda_band)?;
    if p < 2.0 || c <= 0.0 {
        return Err(RateError::InvalidConstant(format!("power type needs p >= 2, c > 0; got p={p}, c={c}")));
    }
    let l0 = 2.0 * k_dom + 2.0 * k1 + 2.0 * k2;
    let l = 144.0 * l0;
    let f: RateFn2 = Arc::new(move |lambda, eps| {
        let num = math::powf(3.0 * k_dom, p - 1.0) * l;
        let den = c * lambda_band * lambda_band * math::powf(eps, p) * math::powf(lambda, p);
        math::ceil_index(num / den)
    });
    Ok(AsRate::new(
        "uy-residual-power-type-as",
        vec![("p", p), ("c", c), ("K", k_dom), ("L", l), ("Lambda", lambda_band)],
        f,
    ))
}

/// Inner-product-space instantiation (`p = 2`, `c = 1/8`) of the geometry
/// fast rates, for the residuals relative to both mappings.
pub struct InnerProductGeometryRates {
    /// `||U y_n - y_n||`, almost surely
    pub r_uy_as: AsRate,
    /// `||U x_n - x_n||`, almost surely: `ceil(24 K L / (Lambda^2 eps^2 lambda^2))`
    pub r_ux_as: AsRate,
    /// `||T x_n - x_n||`, almost surely: `ceil(72 K L / (Lambda^2 eps^2 lambda^2))`
    pub r_tx_as: AsRate,
    /// `||U y_n - y_n||` in mean (needs `mu`)
    pub r_uy_mean: Option<MeanRate>,
    /// `||U x_n - x_n||` in mean: `ceil(96 K L / (Lambda^2 eps^2 mu(eps/4)^2))`
    pub r_ux_mean: Option<MeanRate>,
    /// `||T x_n - x_n||` in mean: `ceil(288 K L / (Lambda^2 eps^2 mu(eps/4)^2))`
    pub r_tx_mean: Option<MeanRate>,
    /// the assembled constant `L = 144 (2K + 2K1 + 2K2)`
    pub l: f64,
}

pub fn inner_product_geometry_rates(
    k_dom: f64,
    k1: f64,
    k2: f64,
    lambda_band: f64,
    mu: Option<&UiModulus>,
) -> Result<InnerProductGeometryRates, RateError> {
    check_band(lambda_band)?;
    if !(k_dom.is_finite() && k_dom > 0.0) {
        return Err(RateError::CertificateMismatch(format!(
            "domination constant must be positive, got {k_dom}"
        )));
    }
    let l0 = 2.0 * k_dom + 2.0 * k1 + 2.0 * k2;
    let l = 144.0 * l0;
    let lb2 = lambda_band * lambda_band;
    let consts = vec![("K", k_dom), ("L", l), ("Lambda", lambda_band)];

    let r_uy_as = power_type_geometry_as_rate(2.0, 0.125, k_dom, k1, k2, lambda_band)?;
    let r_ux_as = AsRate::new(
        "ux-residual-geometry-as",
        consts.clone(),
        Arc::new(move |lambda, eps| {
            math::ceil_index(24.0 * k_dom * l / (lb2 * eps * eps * lambda * lambda))
        }),
    );
    let r_tx_as = AsRate::new(
        "tx-residual-geometry-as",
        consts.clone(),
        Arc::new(move |lambda, eps| {
            math::ceil_index(72.0 * k_dom * l / (lb2 * eps * eps * lambda * lambda))
        }),
    );

    let (r_uy_mean, r_ux_mean, r_tx_mean) = match mu {
        Some(mu) => {
            let mu1 = mu.clone();
            let uy = MeanRate::new(
                "uy-residual-geometry-mean",
                consts.clone(),
                Arc::new(move |eps| {
                    // 2^p (3K)^{p-1} L / (C Lambda^2 eps^p mu^p) at p=2, C=1/8
                    let m = mu1.mu(eps / 4.0);
                    math::ceil_index(96.0 * k_dom * l / (lb2 * eps * eps * m * m))
                }),
            );
            let mu2 = mu.clone();
            let ux = MeanRate::new(
                "ux-residual-geometry-mean",
                consts.clone(),
                Arc::new(move |eps| {
                    let m = mu2.mu(eps / 4.0);
                    math::ceil_index(96.0 * k_dom * l / (lb2 * eps * eps * m * m))
                }),
            );
            let mu3 = mu.clone();
            let tx = MeanRate::new(
                "tx-residual-geometry-mean",
                consts.clone(),
                Arc::new(move |eps| {
                    let m = mu3.mu(eps / 4.0);
                    math::ceil_index(288.0 * k_dom * l / (lb2 * eps * eps * m * m))
                }),
            );
            (Some(uy), Some(ux), Some(tx))
        }
        None => (None, None, None),
    };

    Ok(InnerProductGeometryRates { r_uy_as, r_ux_as, r_tx_as, r_uy_mean, r_ux_mean, r_tx_mean, l })
}

// --- boundedness certificates ---------------------------------------------------

/// Where a boundedness constant came from; carried through to reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HypSource {
    /// Derived from a declared common fixed point.
    DeclaredFixedPoint,
    /// Supplied by the user.
    User,
    /// Estimated from a pilot ensemble; reports flag this.
    Empirical,
}

impl HypSource {
    pub fn name(&self) -> &'static str {
        match self {
            HypSource::DeclaredFixedPoint => "declared-fixed-point",
            HypSource::User => "user",
            HypSource::Empirical => "empirical",
        }
    }
}

/// Boundedness certificate: `k0` bounds the four driving expectations, and,
/// when `pathwise` holds, also the mean of a single dominating variable so
/// that almost-sure constructions apply.
#[derive(Clone, Copy, Debug)]
pub struct HypCertificate {
    pub k0: f64,
    pub pathwise: bool,
    pub source: HypSource,
}

/// Certificate from a declared common fixed point with constant anchor and
/// start: with `k_point >= max(||x0 - p||, ||u - p||)` and summed noise-mean
/// bounds `e_sum`, `d_sum`, the dominating variable has mean at most
/// `K = 4 k_point + 2 e_sum + 2 d_sum`.
pub fn hyp_from_fixed_point(k_point: f64, e_sum: f64, d_sum: f64) -> HypCertificate {
    HypCertificate {
        k0: 4.0 * k_point + 2.0 * e_sum + 2.0 * d_sum,
        pathwise: true,
        source: HypSource::DeclaredFixedPoint,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Schedule;

    fn halpern_theta() -> ThetaFn {
        Schedule::HalpernTwo.divergence_modulus().unwrap()
    }

    /// chi(eps) = ceil(2/eps) certifies c_n = 2/((n+1)(n+2)); the tail from N
    /// telescopes to 2/(N+1).
    fn toy_chi() -> ChiFn {
        Arc::new(|eps| math::ceil_index(2.0 / eps))
    }

    #[test]
    fn xu_rate_frozen_value_and_recursion_oracle() {
        let rate = xu_rate(1.0, halpern_theta(), toy_chi()).unwrap();
        // frozen from the formula: theta(chi(0.05), ln 20) + 1 = 189
        assert_eq!(rate.index(0.1).unwrap(), 189);

        // independent recursion oracle with witnessing sequences
        let idx = rate.index(0.1).unwrap();
        let mut s = 1.0f64;
        for n in 0..4000u64 {
            if n >= idx {
                assert!(s < 0.1, "s_{n} = {s}");
            }
            let a = 2.0 / (n as f64 + 2.0);
            let c = 2.0 / ((n as f64 + 1.0) * (n as f64 + 2.0));
            s = (1.0 - a) * s + c;
        }
    }

    #[test]
    fn xu_rate_dominates_chi_half() {
        let rate = xu_rate(1.0, halpern_theta(), toy_chi()).unwrap();
        let chi = toy_chi();
        for eps in [1.0f64, 0.5, 0.2, 0.1, 0.05] {
            assert!(rate.index(eps).unwrap() >= chi(eps / 2.0));
        }
    }

    #[test]
    fn xu_rate_rejects_nonpositive_eps_and_k() {
        let rate = xu_rate(1.0, halpern_theta(), toy_chi()).unwrap();
        assert!(rate.index(0.0).is_err());
        assert!(rate.index(-1.0).is_err());
        assert!(xu_rate(0.0, halpern_theta(), toy_chi()).is_err());
    }

    #[test]
    fn stochastic_rates_compose_mean_rate() {
        let (mean, as_rate) = stochastic_xu_rates(1.0, halpern_theta(), toy_chi()).unwrap();
        for eps in [1.0f64, 0.4, 0.2] {
            assert_eq!(as_rate.index(1.0, eps).unwrap(), mean.index(eps / 2.0).unwrap());
        }
        // frozen: psi(0.5, 0.2) = phi(0.05) = 520
        assert_eq!(as_rate.index(0.5, 0.2).unwrap(), 520);
        assert_eq!(mean.index(0.05).unwrap(), 520);
    }

    /// Monte Carlo spot check on a synthetic process obeying the recursion
    /// hypotheses: X_{n+1} = (1 - a_n) X_n + C_n with a_n = 2/(n+2) and
    /// C_n uniform on [0, 2 c_n] for c_n = 2/((n+1)(n+2)). The mean rate must
    /// bound E[X_n] and the tail rate the exceedance frequency.
    #[test]
    fn stochastic_rates_sound_on_synthetic_process() {
        use crate::rng::PathRng;
        let (mean, as_rate) = stochastic_xu_rates(1.0, halpern_theta(), toy_chi()).unwrap();
        let (lambda, eps) = (0.5, 0.2);
        let idx_mean = mean.index(eps).unwrap() as usize;
        let idx_tail = as_rate.index(lambda, eps).unwrap() as usize; // frozen: 520
        let horizon = idx_tail + 80;
        let paths = 2000;
        let mut exceed = 0u64;
        let mut sum_at_idx = 0.0;
        for p in 0..paths {
            let mut rng = PathRng::seed_from_u64(0xBEE5 ^ p);
            let mut x = 1.0f64;
            let mut hit = false;
            for n in 0..horizon {
                if n >= idx_tail && x >= eps {
                    hit = true;
                }
                if n == idx_mean {
                    sum_at_idx += x;
                }
                let a = 2.0 / (n as f64 + 2.0);
                let c = 2.0 / ((n as f64 + 1.0) * (n as f64 + 2.0));
                x = (1.0 - a) * x + 2.0 * c * rng.uniform();
            }
            if hit {
                exceed += 1;
            }
        }
        let freq = exceed as f64 / paths as f64;
        assert!(freq < lambda, "tail frequency {freq} at index {idx_tail}");
        let mean_at_idx = sum_at_idx / paths as f64;
        assert!(mean_at_idx < eps, "mean {mean_at_idx} at index {idx_mean}");
    }

    #[test]
    fn transfer_on_deterministic_process() {
        // X_n = 1/(n+1) with C_n = 0: phi(eps) = ceil(1/eps) is a rate and
        // the transferred rate must again witness the plain convergence
        let phi = MeanRate::new("toy", vec![], Arc::new(|eps| math::ceil_index(1.0 / eps)));
        let zero_chi: ChiFn = Arc::new(|_| 0);
        let psi = mean_to_as_transfer(&phi, zero_chi);
        for lambda in [1.0f64, 0.5, 0.2] {
            for eps in [1.0f64, 0.5, 0.1] {
                let n0 = psi.index(lambda, eps).unwrap();
                for n in n0..n0 + 50 {
                    let x = 1.0 / (n as f64 + 1.0);
                    assert!(x < eps, "lambda={lambda} eps={eps} n={n}");
                }
            }
        }
        // equal moduli collapse to phi(lambda eps / 2)
        let chi_eq: ChiFn = Arc::new(|eps| math::ceil_index(1.0 / eps));
        let psi2 = mean_to_as_transfer(&phi, chi_eq);
        assert_eq!(psi2.index(0.4, 0.5).unwrap(), phi.index(0.1).unwrap());
    }

    #[test]
    fn summed_mean_to_as_formula() {
        let chi: ChiFn = Arc::new(|eps| math::ceil_index(1.0 / eps));
        let psi = summed_mean_to_as("noise-as", chi);
        assert_eq!(psi.index(0.1, 0.1).unwrap(), 100);
    }

    fn desk_inputs() -> ArInputs {
        ArInputs::assemble(
            &Schedule::HalpernTwo,
            &Schedule::Constant(0.5),
            &NoiseModel::GaussianDecay { k1: 1.0 },
            &NoiseModel::Zero,
            6.0,
        )
        .unwrap()
    }

    #[test]
    fn ar_inputs_constant_composition() {
        let inp = desk_inputs();
        // E0 = K1/4, D0 = 0, B1 = 2*K1, B2 = 0, B3 = total alpha variation 1,
        // B4 = 0: K = 2*6 + 0.25 + 0 + (2 + 0 + 1*(0.25+6) + 0) = 20.5
        assert!((inp.e0 - 0.25).abs() < 1e-15);
        assert_eq!(inp.d0, 0.0);
        assert!((inp.error_sum_bound() - 8.25).abs() < 1e-12);
        assert!((inp.displacement_bound() - 20.5).abs() < 1e-12);
    }

    #[test]
    fn ar_inputs_error_on_missing_divergence() {
        let res = ArInputs::assemble(
            &Schedule::Constant(0.0),
            &Schedule::Constant(0.5),
            &NoiseModel::Zero,
            &NoiseModel::Zero,
            1.0,
        );
        assert!(matches!(res, Err(RateError::MissingModulus(_))));
    }

    #[test]
    fn x_ar_rates_zero_noise_drops_noise_terms() {
        // noise-free, constant beta: composite chi reduces to the alpha
        // variation term at eps/(4 K0)
        let inp = ArInputs::assemble(
            &Schedule::HalpernTwo,
            &Schedule::Constant(0.5),
            &NoiseModel::Zero,
            &NoiseModel::Zero,
            2.0,
        )
        .unwrap();
        let chi = inp.composite_chi();
        let (chi3, _) = Schedule::HalpernTwo.variation_modulus().unwrap();
        for eps in [1.0f64, 0.5, 0.11] {
            assert_eq!(chi(eps), chi3(eps / 8.0));
        }
        let (mean, as_rate) = x_ar_rates(&inp).unwrap();
        assert!(mean.index(0.5).unwrap() > 0);
        assert_eq!(
            as_rate.index(1.0, 0.5).unwrap(),
            mean.index(0.25).unwrap()
        );
    }

    #[test]
    fn y_rates_dominate_their_components() {
        let inp = desk_inputs();
        let (x_mean, _) = x_ar_rates(&inp).unwrap();
        let (y_mean, y_as) = y_ar_rates(&inp).unwrap();
        for eps in [1.0f64, 0.5, 0.2] {
            assert!(y_mean.index(eps).unwrap() >= x_mean.index(eps / 3.0).unwrap());
            assert!(y_as.index(0.5, eps).unwrap() >= y_mean.index(0.5 * eps / 2.0).unwrap());
        }
    }

    #[test]
    fn relative_rates_compose_exactly() {
        let phi_ruy = MeanRate::zero("uy-zero");
        let rho1 = MeanRate::new("xi-rate", vec![], Arc::new(|eps| math::ceil_index(1.0 / eps)));
        let rho2 = MeanRate::zero("delta-zero");
        let rho3 =
            MeanRate::new("alpha-rate", vec![], Arc::new(|eps| math::ceil_index(2.0 / eps)));
        let phi0 =
            MeanRate::new("dx-rate", vec![], Arc::new(|eps| math::ceil_index(5.0 / eps)));
        let k0 = 2.0;
        let rates = relative_rates(&phi_ruy, &rho1, &rho2, &rho3, &phi0, k0).unwrap();

        for eps in [0.9f64, 0.3, 0.1] {
            // chaining consistency: recompute the composed formulas directly
            let phi1 = math::ceil_index(5.0 / (eps / 3.0));
            assert_eq!(rates.xy.index(eps).unwrap(), phi1);
            let phi2 = {
                let a = rates.xy.index(eps / 3.0).unwrap();
                let b = math::ceil_index(2.0 / (eps / (3.0 * k0)));
                let c = math::ceil_index(1.0 / (eps / 3.0));
                a.max(b).max(c)
            };
            assert_eq!(rates.r_ty.index(eps).unwrap(), phi2);
            assert_eq!(
                rates.r_ux.index(eps).unwrap(),
                rates.xy.index(eps / 3.0).unwrap()
            );
            assert_eq!(
                rates.r_tx.index(eps).unwrap(),
                rates.xy.index(eps / 3.0).unwrap().max(rates.r_ty.index(eps / 3.0).unwrap())
            );
        }
    }

    #[test]
    fn anchored_special_case_collapses_to_known_shape() {
        // with U = Id the residual-rate composition must reduce to
        // max(phi0(eps/27), rho_alpha(eps/(9 K0)), rho_xi(eps/9))
        let phi_ruy = MeanRate::zero("uy-identity");
        let rho1 = MeanRate::new("xi", vec![], Arc::new(|eps| math::ceil_index(1.0 / eps)));
        let rho2 = MeanRate::zero("delta-zero");
        let rho3 = MeanRate::new("alpha", vec![], Arc::new(|eps| math::ceil_index(2.0 / eps)));
        let phi0 = MeanRate::new("dx", vec![], Arc::new(|eps| math::ceil_index(7.0 / eps)));
        let k0 = 3.0;
        let rates = relative_rates(&phi_ruy, &rho1, &rho2, &rho3, &phi0, k0).unwrap();
        for eps in [2.0f64, 0.9, 0.5, 0.21, 0.07] {
            // nest the divisions exactly as the composition does; eps/27 may
            // differ from (eps/3)/3/3 by an ulp, which moves a ceiling
            let e3 = eps / 3.0;
            let e9 = e3 / 3.0;
            let e27 = e9 / 3.0;
            let expect = phi0
                .index(e27)
                .unwrap()
                .max(rho3.index(e3 / (3.0 * k0)).unwrap())
                .max(rho1.index(e9).unwrap());
            assert_eq!(rates.r_tx.index(eps).unwrap(), expect, "eps={eps}");
            // the shallower displacement term is subsumed by the deeper one
            assert!(phi0.index(e9).unwrap() <= phi0.index(e27).unwrap());
        }
    }

    #[test]
    fn relative_as_rates_compose_exactly() {
        let psi_ruy = AsRate::new(
            "uy",
            vec![],
            Arc::new(|l, e| math::ceil_index(1.0 / (l * e))),
        );
        let rho = MeanRate::new("alpha", vec![], Arc::new(|e| math::ceil_index(2.0 / e)));
        let phi1 = AsRate::zero("xi");
        let phi2 = AsRate::zero("delta");
        let psi0 = AsRate::new(
            "dx",
            vec![],
            Arc::new(|l, e| math::ceil_index(4.0 / (l * e))),
        );
        let k0 = 2.0;
        let rates = relative_rates_as(&psi_ruy, &rho, &phi1, &phi2, &psi0, k0).unwrap();
        for (lambda, eps) in [(0.5f64, 0.9f64), (0.2, 0.3)] {
            // psi_3(lambda, eps) = max(psi_1(lambda/2, eps/3), psi(lambda/2, eps/3))
            let expect = rates
                .xy
                .index(lambda / 2.0, eps / 3.0)
                .unwrap()
                .max(psi_ruy.index(lambda / 2.0, eps / 3.0).unwrap());
            assert_eq!(rates.r_ux.index(lambda, eps).unwrap(), expect);
            // psi_2 carries the anchored term rho(eps lambda / 9 K0)
            let expect_ty = rates
                .xy
                .index(lambda / 3.0, eps / 3.0)
                .unwrap()
                .max(rho.index(eps * lambda / (9.0 * k0)).unwrap());
            assert_eq!(rates.r_ty.index(lambda, eps).unwrap(), expect_ty);
        }
    }

    #[test]
    fn inner_product_mean_rates_quadratic_pattern() {
        // mu(eps) = eps/4 (error-free domination with K = 1): the in-mean
        // rate for the residual relative to U is ceil(96 K L / (L^2 ... ))
        let mu = crate::geometry::UiModulus::from_fn("test", Arc::new(|eps| eps / 4.0));
        let rates = inner_product_geometry_rates(4.0, 0.0, 0.0, 0.5, Some(&mu)).unwrap();
        let eps = 0.5f64;
        let m = eps / 16.0; // mu(eps/4)
        let expect = math::ceil_index(96.0 * 4.0 * 1152.0 / (0.25 * eps * eps * m * m));
        assert_eq!(rates.r_ux_mean.unwrap().index(eps).unwrap(), expect);
        let expect_tx = math::ceil_index(288.0 * 4.0 * 1152.0 / (0.25 * eps * eps * m * m));
        assert_eq!(rates.r_tx_mean.unwrap().index(eps).unwrap(), expect_tx);
    }

    #[test]
    fn relative_as_rates_require_certificate() {
        let z = AsRate::zero("z");
        let rho = MeanRate::zero("rho");
        assert!(relative_rates_as(&z, &rho, &z, &z, &z, f64::NAN).is_err());
        assert!(relative_rates_as(&z, &rho, &z, &z, &z, -1.0).is_err());
        let ok = relative_rates_as(&z, &rho, &z, &z, &z, 1.0).unwrap();
        assert_eq!(ok.r_ux.index(0.5, 0.5).unwrap(), 0);
        // degenerate certificate: the anchored term drops out
        let degenerate = relative_rates_as(&z, &rho, &z, &z, &z, 0.0).unwrap();
        assert_eq!(degenerate.r_ty.index(0.5, 0.5).unwrap(), 0);
    }

    #[test]
    fn kmt_rates_structure() {
        let phi_dy =
            MeanRate::new("dy", vec![], Arc::new(|eps| math::ceil_index(1.0 / eps)));
        let rho = MeanRate::new("alpha", vec![], Arc::new(|eps| math::ceil_index(2.0 / eps)));
        let chi_zero = MeanRate::zero("delta");
        let k0 = 2.0;
        let lambda_band = 0.5;
        let kappa = kmt_residual_mean_rate(lambda_band, k0, &phi_dy, &rho, &chi_zero).unwrap();
        for eps in [1.0f64, 0.4] {
            // zero-noise collapse: max(phi(eps/8), rho(eps/(8 K0))) + 1
            let expect = math::ceil_index(8.0 / eps).max(math::ceil_index(32.0 / eps)) + 1;
            assert_eq!(kappa.index(eps).unwrap(), expect);
        }
        assert!(kmt_residual_mean_rate(0.0, k0, &phi_dy, &rho, &chi_zero).is_err());
        assert!(kmt_residual_mean_rate(0.7, k0, &phi_dy, &rho, &chi_zero).is_err());
    }

    #[test]
    fn partial_products_closed_form() {
        // anchored schedule: prod_{i=j}^{k} (1 - 2/(i+2)) = j(j+1)/((k+1)(k+2))
        let s = Schedule::HalpernTwo;
        assert_eq!(partial_product(&s, 4, 3).unwrap(), 1.0);
        let p13 = partial_product(&s, 1, 3).unwrap();
        assert!((p13 - 0.1).abs() < 1e-15, "got {p13}");
        for (j, k) in [(0u64, 5u64), (1, 1), (2, 10), (3, 100), (1, 1000)] {
            let direct = partial_product(&s, j, k).unwrap();
            let closed = (j * (j + 1)) as f64 / ((k + 1) * (k + 2)) as f64;
            assert!((direct - closed).abs() <= 1e-12, "j={j} k={k}");
        }
    }

    #[test]
    fn linear_closed_form_bound_against_recursion_oracle() {
        for l in [1.0f64, 10.0] {
            let fb = sabach_shtern_bound(&Schedule::HalpernTwo, l, l).unwrap();
            // exact recursion s_{n+1} = (1-a_{n+1}) s_n + (a_n - a_{n+1}) L
            let mut s = l;
            for n in 0..=10_000u64 {
                assert!(
                    s <= fb.mean_bound(n) + 1e-12,
                    "L={l}, n={n}: s={s} bound={}",
                    fb.mean_bound(n)
                );
                let a_n = 2.0 / (n as f64 + 2.0);
                let a_n1 = 2.0 / (n as f64 + 3.0);
                s = (1.0 - a_n1) * s + (a_n - a_n1) * l;
            }
        }
        // s_1 = 2/3 for L = 1 hits the bound with equality
        let mut s: f64 = 1.0;
        let (a0, a1) = (1.0, 2.0 / 3.0);
        s = (1.0 - a1) * s + (a0 - a1) * 1.0;
        assert!((s - 2.0 / 3.0).abs() < 1e-15);

        assert!(sabach_shtern_bound(&Schedule::Constant(0.5), 1.0, 1.0).is_err());
        assert!(sabach_shtern_bound(&Schedule::HalpernTwo, 1.0, 2.0).is_err());
    }

    #[test]
    fn fast_bounds_dx_constants() {
        let fb = fast_bounds(FastCase::Dx, 1.0, 0.0, 0.0, None).unwrap();
        assert_eq!(fb.l(), 2.0);
        assert_eq!(fb.mean_bound(0), 2.0);
        assert!((fb.tail_bound(0.5, 10) - 4.0 * 2.0 / (0.5 * 12.0)).abs() < 1e-15);
        let rate = fb.mean_rate();
        // 2L/(n+2) < eps first at n = ceil(2L/eps) - 2; returned ceil(2L/eps)
        assert_eq!(rate.index(1.0).unwrap(), 4);
    }

    #[test]
    fn fast_bounds_case_gating() {
        assert!(fast_bounds(FastCase::HalpernResidual, 1.0, 1.0, 0.5, None).is_err());
        assert!(fast_bounds(FastCase::KmtResidual, 1.0, 0.5, 1.0, Some(2.0)).is_err());
        assert!(fast_bounds(FastCase::KmtResidual, 1.0, 0.0, 1.0, None).is_err());
        let kmt = fast_bounds(FastCase::KmtResidual, 1.0, 0.0, 1.0, Some(2.0)).unwrap();
        assert_eq!(kmt.valid_from(), 1);
        assert!((kmt.l() - (12.0 + 15.0 + 2.0 * (990.0 + 675.0))).abs() < 1e-9);
        let hal = fast_bounds(FastCase::HalpernResidual, 2.0, 1.0, 0.0, None).unwrap();
        assert_eq!(hal.l(), 60.0);
    }

    #[test]
    fn hyp_certificate_from_fixed_point() {
        let cert = hyp_from_fixed_point(1.0, 1.0, 0.0);
        assert_eq!(cert.k0, 6.0);
        assert!(cert.pathwise);
        assert_eq!(cert.source, HypSource::DeclaredFixedPoint);
    }

    #[test]
    fn geometry_as_rate_composition() {
        let modulus = UcModulus::inner_product();
        let delta = AsRate::new(
            "dx-as",
            vec![],
            Arc::new(|lambda, eps| math::ceil_index(8.0 / (eps * lambda))),
        );
        let rho = MeanRate::new("alpha", vec![], Arc::new(|eps| math::ceil_index(2.0 / eps)));
        let chi1: ChiFn = Arc::new(|eps| math::ceil_index(1.0 / eps));
        let chi2: ChiFn = Arc::new(|_| 0);
        let k = 4.0;
        let lb = 0.5;
        let rate = geometry_as_rate(&modulus, k, lb, &delta, &rho, chi1.clone(), chi2.clone(), true).unwrap();

        // recompute the composition by hand for a couple of grid points
        for (lambda, eps) in [(0.5f64, 1.0f64), (0.2, 0.5)] {
            let k_prime = 3.0 * k / lambda;
            let eta_tilde = (eps / k_prime) / 8.0;
            let eps_hat = eps * lb * lb * eta_tilde;
            let expect = math::ceil_index(8.0 / ((eps_hat / 4.0) * (lambda / 9.0)))
                .max(math::ceil_index(2.0 / (eps_hat / (4.0 * k_prime))))
                .max(math::ceil_index(1.0 / (lambda * eps_hat / 36.0)));
            assert_eq!(rate.index(lambda, eps).unwrap(), expect);
        }

        // unoptimized variant uses eta instead of eta-tilde and is larger
        let plain = geometry_as_rate(&modulus, k, lb, &delta, &rho, chi1, chi2, false).unwrap();
        assert!(plain.index(0.2, 0.5).unwrap() >= rate.index(0.2, 0.5).unwrap());
    }

    #[test]
    fn inner_product_rates_frozen_values() {
        // K = 4, no noise, Lambda = 1/2: L0 = 8, L = 1152
        let rates = inner_product_geometry_rates(4.0, 0.0, 0.0, 0.5, None).unwrap();
        assert_eq!(rates.l, 1152.0);
        // Phi_1(0.2, 0.5) = ceil(24*4*1152 / (0.25 * 0.25 * 0.04)) = 44_236_800
        assert_eq!(rates.r_ux_as.index(0.2, 0.5).unwrap(), 44_236_800);
        assert_eq!(
            rates.r_tx_as.index(0.2, 0.5).unwrap(),
            3 * 44_236_800
        );
        // general power-type formula agrees with the closed form
        let gamma = power_type_geometry_as_rate(2.0, 0.125, 4.0, 0.0, 0.0, 0.5).unwrap();
        let by_hand = math::ceil_index(3.0 * 4.0 * 1152.0 / (0.125 * 0.25 * 0.25 * 0.04));
        assert_eq!(gamma.index(0.2, 0.5).unwrap(), by_hand);
    }

    #[test]
    fn mean_rates_nonincreasing_on_grid() {
        let inp = desk_inputs();
        let (x_mean, x_as) = x_ar_rates(&inp).unwrap();
        let grid = [2.0f64, 1.0, 0.5, 0.25, 0.125, 0.0625];
        let mut prev = 0u64;
        for eps in grid {
            let idx = x_mean.index(eps).unwrap();
            assert!(idx >= prev, "mean rate must grow as eps shrinks");
            prev = idx;
        }
        for lambda in [1.0f64, 0.5, 0.25] {
            let mut prev = 0u64;
            for eps in grid {
                let idx = x_as.index(lambda, eps).unwrap();
                assert!(idx >= prev);
                prev = idx;
            }
        }
        for eps in [1.0f64, 0.5] {
            let mut prev = 0u64;
            for lambda in [1.0f64, 0.5, 0.25, 0.125] {
                let idx = x_as.index(lambda, eps).unwrap();
                assert!(idx >= prev);
                prev = idx;
            }
        }
    }
}
