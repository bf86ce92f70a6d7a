//! Maximum-likelihood inference: log-likelihood, score, EM and quasi-Newton
//! fitting, observed information, Wald intervals and likelihood-ratio tests.

mod direct;
mod em;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::dist::EwlParams;
use crate::error::{EwlError, Result};
use crate::special::ln_one_minus_exp_neg;
use crate::submodels::{restrict, FamilyId};

pub use direct::direct_fit_family;
pub use em::em_fit_family;

/// Bounds on `θ` during fitting; a fit ending on either is flagged.
pub const THETA_PIN: (f64, f64) = (1e-8, 1.0 - 1e-8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    pub loglik_tol: f64,
    pub param_tol: f64,
    pub inner_solver_tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 2000,
            loglik_tol: 1e-8,
            param_tol: 1e-8,
            inner_solver_tol: 1e-10,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0
            || !(self.loglik_tol > 0.0)
            || !(self.param_tol > 0.0)
            || !(self.inner_solver_tol > 0.0)
        {
            return Err(EwlError::domain("EM tolerances must be positive and max_iter at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    #[serde(rename = "EM")]
    Em,
    Direct,
    #[serde(rename = "EMthenDirect")]
    EmThenDirect,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMethod::Em => "EM",
            FitMethod::Direct => "Direct",
            FitMethod::EmThenDirect => "EMthenDirect",
        })
    }
}

impl std::str::FromStr for FitMethod {
    type Err = EwlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "em" => Ok(FitMethod::Em),
            "direct" => Ok(FitMethod::Direct),
            "emthendirect" | "hybrid" => Ok(FitMethod::EmThenDirect),
            _ => Err(EwlError::domain(format!(
                "unknown fit method '{s}' (expected em, direct or hybrid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub method: FitMethod,
    pub em: EmConfig,
    /// User start point; replaces the default multistart grid.
    pub init: Option<EwlParams>,
    /// Extra start points tried alongside the grid (fits of nested families).
    pub warm_starts: Vec<EwlParams>,
    pub multistart: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            method: FitMethod::EmThenDirect,
            em: EmConfig::default(),
            init: None,
            warm_starts: Vec::new(),
            multistart: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FamilyId,
    pub params: EwlParams,
    /// Standard errors of the free parameters, in `family.free_indices()` order.
    pub std_errors: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub n_obs: usize,
    pub method: FitMethod,
    pub iterations: usize,
    pub converged: bool,
    pub convergence_gap: f64,
    /// `θ` finished on, or within a factor of 100 of, one of the
    /// [`THETA_PIN`] bounds.
    pub boundary: bool,
}

impl FitResult {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        family: FamilyId,
        params: EwlParams,
        loglik: f64,
        n_obs: usize,
        method: FitMethod,
        iterations: usize,
        converged: bool,
        convergence_gap: f64,
    ) -> Self {
        let boundary = !family.theta_limit()
            && (params.theta() <= 100.0 * THETA_PIN.0 || 1.0 - params.theta() <= 100.0 * (1.0 - THETA_PIN.1));
        FitResult {
            family,
            params,
            std_errors: Vec::new(),
            loglik,
            aic: aic(loglik, family.n_free()),
            n_obs,
            method,
            iterations,
            converged: converged && !boundary,
            convergence_gap,
            boundary,
        }
    }

    /// Estimates of the free parameters, aligned with `std_errors`.
    pub fn free_estimates(&self) -> Vec<f64> {
        let all = self.params.as_array();
        self.family.free_indices().iter().map(|&i| all[i]).collect()
    }
}

pub fn aic(loglik: f64, n_free: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_free as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrTestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub null_family: FamilyId,
    pub alt_family: FamilyId,
    pub null_loglik: f64,
    pub alt_loglik: f64,
}

pub fn check_data(data: &[f64]) -> Result<()> {
    if data.is_empty() {
        return Err(EwlError::domain("data set is empty"));
    }
    if let Some((i, y)) = data.iter().enumerate().find(|(_, y)| !(**y > 0.0 && y.is_finite())) {
        return Err(EwlError::domain(format!(
            "observation {} is {y}; all observations must be positive and finite",
            i + 1
        )));
    }
    Ok(())
}

/// Observed-data log-likelihood of the full EWL model.
pub fn loglik(data: &[f64], p: &EwlParams) -> Result<f64> {
    family_loglik(data, p, FamilyId::Ewl)
}

/// Log-likelihood of `family` (θ-limit families use their own densities).
pub fn family_loglik(data: &[f64], p: &EwlParams, family: FamilyId) -> Result<f64> {
    check_data(data)?;
    p.validate()?;
    let mut total = 0.0;
    for &y in data {
        total += family.ln_pdf(p, y)?;
    }
    Ok(total)
}

/// `1/θ + 1/((1-θ) log(1-θ))`, the per-observation constant in `∂l/∂θ`,
/// without the cancellation that hits the direct form as `θ → 0`.
fn theta_constant(theta: f64) -> f64 {
    let l = (-theta).ln_1p();
    if theta < 0.1 {
        // (1-θ) log(1-θ) + θ = Σ_{m≥2} θ^m / (m(m-1))
        let mut a = 0.0;
        let mut pow = theta;
        for m in 2..60 {
            pow *= theta;
            let t = pow / (m * (m - 1)) as f64;
            a += t;
            if t < 1e-17 * a {
                break;
            }
        }
        a / (theta * (1.0 - theta) * l)
    } else {
        1.0 / theta + 1.0 / ((1.0 - theta) * l)
    }
}

/// Per-observation pieces shared by the score and the EM step.
pub(crate) struct Obs {
    pub ln_by: f64,
    pub z: f64,
    pub ln_u: f64,
    /// `z / (e^z - 1)`
    pub r: f64,
}

impl Obs {
    pub fn new(beta: f64, gamma: f64, y: f64) -> Self {
        let ln_by = beta.ln() + y.ln();
        let z = (gamma * ln_by).exp();
        let r = if z < 1e-8 { 1.0 - 0.5 * z } else { z / z.exp_m1() };
        Obs {
            ln_by,
            z,
            ln_u: ln_one_minus_exp_neg(z),
            r,
        }
    }
}

/// Analytic score `(∂l/∂α, ∂l/∂β, ∂l/∂γ, ∂l/∂θ)` of the EWL log-likelihood.
pub fn score(data: &[f64], p: &EwlParams) -> Result<[f64; 4]> {
    check_data(data)?;
    p.validate()?;
    let (a, b, g, t) = (p.alpha(), p.beta(), p.gamma(), p.theta());
    let mut s = [0.0; 4];
    for &y in data {
        let o = Obs::new(b, g, y);
        let u_a = (a * o.ln_u).exp();
        let w = t * u_a;
        // 1 - w = (1-θ) + θ(1 - u^α), accurate when w is close to 1
        let omw = (1.0 - t) + t * -(a * o.ln_u).exp_m1();
        let k = (a - 1.0) + a * w / omw;
        let common = 1.0 - o.z + o.r * k;
        s[0] += 1.0 / a + o.ln_u / omw;
        s[1] += g / b * common;
        s[2] += 1.0 / g + o.ln_by * common;
        s[3] += u_a / omw;
    }
    s[3] += data.len() as f64 * theta_constant(t);
    Ok(s)
}

/// Score of the exponentiated Weibull log-likelihood in `(α, β, γ)`.
pub fn ew_score(data: &[f64], alpha: f64, beta: f64, gamma: f64) -> Result<[f64; 3]> {
    check_data(data)?;
    let mut s = [0.0; 3];
    for &y in data {
        let o = Obs::new(beta, gamma, y);
        let common = 1.0 - o.z + o.r * (alpha - 1.0);
        s[0] += 1.0 / alpha + o.ln_u;
        s[1] += gamma / beta * common;
        s[2] += 1.0 / gamma + o.ln_by * common;
    }
    Ok(s)
}

/// Score of `family` with respect to its free parameters.
pub fn family_score(data: &[f64], p: &EwlParams, family: FamilyId) -> Result<Vec<f64>> {
    let full: [f64; 4] = if family.theta_limit() {
        let s = ew_score(data, p.alpha(), p.beta(), p.gamma())?;
        [s[0], s[1], s[2], 0.0]
    } else {
        score(data, p)?
    };
    Ok(family.free_indices().iter().map(|&i| full[i]).collect())
}

/// Conditional expectations `E[Z | Y = y_i] = 1 / (1 - θ u_i^α)`.
pub fn e_step(data: &[f64], p: &EwlParams) -> Result<Vec<f64>> {
    check_data(data)?;
    p.validate()?;
    let (a, b, g, t) = (p.alpha(), p.beta(), p.gamma(), p.theta());
    Ok(data
        .iter()
        .map(|&y| {
            let o = Obs::new(b, g, y);
            1.0 / ((1.0 - t) + t * -(a * o.ln_u).exp_m1())
        })
        .collect())
}

/// EM fit of the full EWL model.
pub fn em_fit(data: &[f64], init: &EwlParams, cfg: &EmConfig) -> Result<FitResult> {
    em_fit_family(data, FamilyId::Ewl, init, cfg).map(|(r, _)| r)
}

/// Quasi-Newton fit of the full EWL model.
pub fn direct_fit(data: &[f64], init: &EwlParams) -> Result<FitResult> {
    direct_fit_family(data, FamilyId::Ewl, init)
}

/// Step for differentiating in coordinate `i` of `(α, β, γ, θ)`.
fn fd_step(p: &EwlParams, i: usize) -> f64 {
    let v = p.as_array()[i];
    if i == 3 {
        1e-5 * v.min(1.0 - v)
    } else {
        1e-5 * v
    }
}

fn shifted(p: &EwlParams, i: usize, h: f64) -> Result<EwlParams> {
    let mut v = p.as_array();
    v[i] += h;
    EwlParams::from_array(v)
}

/// Observed information of `family` over its free parameters, from central
/// differences of the analytic score; symmetrized.
pub fn family_observed_information(data: &[f64], p: &EwlParams, family: FamilyId) -> Result<DMatrix<f64>> {
    let idx = family.free_indices();
    let k = idx.len();
    let mut h = DMatrix::zeros(k, k);
    for (col, &i) in idx.iter().enumerate() {
        let step = fd_step(p, i);
        let plus = family_score(data, &shifted(p, i, step)?, family)?;
        let minus = family_score(data, &shifted(p, i, -step)?, family)?;
        for row in 0..k {
            h[(row, col)] = -(plus[row] - minus[row]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Observed information of the full EWL model.
pub fn observed_information(data: &[f64], p: &EwlParams) -> Result<DMatrix<f64>> {
    let info = family_observed_information(data, p, FamilyId::Ewl)?;
    if info.clone().cholesky().is_none() {
        return Err(EwlError::SingularInformation);
    }
    Ok(info)
}

/// Inverse of a positive definite information matrix.
pub fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    info.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(EwlError::SingularInformation)
}

/// Wald intervals `θ̂_r ± z_{(1-level)/2} √(I^{rr})` for the free parameters.
pub fn confidence_intervals(fit: &FitResult, info: &DMatrix<f64>, level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EwlError::domain(format!("confidence level must be in (0, 1), got {level}")));
    }
    let est = fit.free_estimates();
    if info.nrows() != est.len() || info.ncols() != est.len() {
        return Err(EwlError::domain(format!(
            "information matrix is {}x{}, expected {}x{}",
            info.nrows(),
            info.ncols(),
            est.len(),
            est.len()
        )));
    }
    let inv = invert_information(info)?;
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    Ok(est
        .iter()
        .enumerate()
        .map(|(r, &v)| {
            let half = z * inv[(r, r)].sqrt();
            (v - half, v + half)
        })
        .collect())
}

fn std_errors(data: &[f64], fit: &FitResult) -> Vec<f64> {
    family_observed_information(data, &fit.params, fit.family)
        .and_then(|info| invert_information(&info))
        .map(|inv| (0..inv.nrows()).map(|i| inv[(i, i)].max(0.0).sqrt()).collect())
        .unwrap_or_else(|_| vec![f64::NAN; fit.family.n_free()])
}

/// Weibull start from least squares on the probability plot
/// `log(-log(1 - F̂)) = γ log β + γ log y`.
pub fn weibull_plot_start(data: &[f64]) -> Result<(f64, f64)> {
    check_data(data)?;
    let mut ys = data.to_vec();
    ys.sort_by(f64::total_cmp);
    let n = ys.len() as f64;
    let pts: Vec<(f64, f64)> = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = (i as f64 + 0.7) / (n + 0.4);
            (y.ln(), (-(-f).ln_1p()).ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(EwlError::Degenerate("all observations are equal".into()));
    }
    let gamma = (sxy / sxx).clamp(0.05, 50.0);
    let beta = ((my - gamma * mx) / gamma).exp();
    Ok((beta, gamma))
}

fn start_points(data: &[f64], family: FamilyId, opts: &FitOptions) -> Result<Vec<EwlParams>> {
    let mut starts = Vec::new();
    if let Some(init) = opts.init {
        starts.push(restrict(&init, family));
    } else {
        let (beta, gamma) = weibull_plot_start(data)?;
        starts.push(restrict(&EwlParams::new(1.0, beta, gamma, 0.5)?, family));
        if opts.multistart {
            for &alpha in &[1.0f64, 5.0, 50.0, 1000.0] {
                for &theta in &[0.2, 0.5, 0.9] {
                    // for large α, log Y is near Gumbel with scale 1/(γ log α);
                    // match location and scale of the Weibull plot
                    let (b, g) = if alpha > 3.0 {
                        let l = alpha.ln();
                        let g = family.fixed_gamma().unwrap_or(gamma / l);
                        (beta.ln() + l.ln() / g + 0.5772 / gamma, g)
                    } else {
                        (beta.ln(), gamma)
                    };
                    let p = restrict(&EwlParams::new(alpha, b.exp(), g, theta)?, family);
                    if !starts.contains(&p) {
                        starts.push(p);
                    }
                }
            }
        }
    }
    for w in &opts.warm_starts {
        let p = restrict(w, family);
        if !starts.contains(&p) {
            starts.push(p);
        }
    }
    Ok(starts)
}

fn fit_from(data: &[f64], family: FamilyId, start: &EwlParams, opts: &FitOptions) -> Result<FitResult> {
    match opts.method {
        FitMethod::Em => em_fit_family(data, family, start, &opts.em).map(|(r, _)| r),
        FitMethod::Direct => direct_fit_family(data, family, start),
        FitMethod::EmThenDirect => {
            let cfg = EmConfig {
                loglik_tol: 1e-4,
                ..opts.em
            };
            let (em, _) = em_fit_family(data, family, start, &cfg)?;
            let polished = direct_fit_family(data, family, &em.params)?;
            let best = if polished.loglik >= em.loglik { polished } else { em.clone() };
            Ok(FitResult {
                method: FitMethod::EmThenDirect,
                iterations: em.iterations + best.iterations,
                ..best
            })
        }
    }
}

/// Fits `family` by maximum likelihood from every start point and returns
/// the best fit, with standard errors from the observed information.
pub fn fit(data: &[f64], family: FamilyId, opts: &FitOptions) -> Result<FitResult> {
    check_data(data)?;
    if data.len() < 5 {
        return Err(EwlError::domain(format!("at least 5 observations are required, got {}", data.len())));
    }
    opts.em.validate()?;
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for start in start_points(data, family, opts)? {
        match fit_from(data, family, &start, opts) {
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some(b) => r.loglik > b.loglik + 1e-9 || (r.loglik > b.loglik - 1e-9 && r.converged && !b.converged),
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let mut best = best.ok_or_else(|| last_err.unwrap_or(EwlError::Optimizer("no start point succeeded".into())))?;
    best.loglik = family_loglik(data, &best.params, family)?;
    best.aic = aic(best.loglik, family.n_free());
    best.std_errors = std_errors(data, &best);
    Ok(best)
}

/// Warm start for `alt` from a fit of a family nested in it.
pub fn lift(fit: &FitResult, alt: FamilyId) -> EwlParams {
    let p = fit.params;
    let theta = if fit.family.theta_limit() && !alt.theta_limit() { 1e-4 } else { p.theta() };
    restrict(&EwlParams::new(p.alpha(), p.beta(), p.gamma(), theta).expect("lifted point is valid"), alt)
}

/// Likelihood-ratio statistic from two fits, with a chi-square p-value.
pub fn lr_from_fits(null: &FitResult, alt: &FitResult) -> Result<LrTestResult> {
    let df = FamilyId::nesting_df(null.family, alt.family)?;
    let statistic = (2.0 * (alt.loglik - null.loglik)).max(0.0);
    let p_value = ChiSquared::new(df as f64)
        .map_err(|e| EwlError::domain(e.to_string()))?
        .sf(statistic);
    Ok(LrTestResult {
        statistic,
        df,
        p_value,
        null_family: null.family,
        alt_family: alt.family,
        null_loglik: null.loglik,
        alt_loglik: alt.loglik,
    })
}

/// Fits both families and tests `null` against `alt`.
pub fn lr_test(data: &[f64], null: FamilyId, alt: FamilyId, opts: &FitOptions) -> Result<LrTestResult> {
    FamilyId::nesting_df(null, alt)?;
    let null_fit = fit(data, null, opts)?;
    let mut alt_opts = opts.clone();
    alt_opts.warm_starts.push(lift(&null_fit, alt));
    let mut alt_fit = fit(data, alt, &alt_opts)?;
    if alt_fit.loglik < null_fit.loglik {
        // the larger model must do at least as well; polish from the nested optimum
        let retry = direct_fit_family(data, alt, &lift(&null_fit, alt))?;
        if retry.loglik > alt_fit.loglik {
            alt_fit = retry;
        }
    }
    lr_from_fits(&null_fit, &alt_fit)
}
