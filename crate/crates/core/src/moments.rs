//! Moments, residual life, inequality curves and entropies.
//!
//! Every series quantity has a quadrature twin. The series path expands the
//! density as a double sum over the logarithmic index `n` and a generalized
//! binomial index `j`; when it runs out of terms or loses too many digits to
//! cancellation (large `θ` or large `α`), evaluation falls back to adaptive
//! quadrature and the result is flagged accordingly.

use serde::{Deserialize, Serialize};

use crate::dist::EwlParams;
use crate::error::{EwlError, Result};
use crate::quadrature::{integrate, integrate_to_infinity, QuadResult, QuadTolerance};
use crate::special::{
    ln_gamma_ratio, ln_gamma_unchecked, lower_incomplete_gamma, truncated_sum, upper_incomplete_gamma, SeriesPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentMethod {
    Series,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentResult {
    pub value: f64,
    pub method: MomentMethod,
    /// Series terms evaluated; zero for quadrature.
    pub terms_used: usize,
    pub est_error: f64,
}

impl MomentResult {
    fn quad(r: QuadResult) -> Self {
        MomentResult {
            value: r.value,
            method: MomentMethod::Quadrature,
            terms_used: 0,
            est_error: r.abs_error,
        }
    }

    fn series(s: Partial, scale: f64) -> Self {
        MomentResult {
            value: s.value * scale,
            method: MomentMethod::Series,
            terms_used: s.terms.max(1),
            est_error: s.error * scale.abs(),
        }
    }

    fn map(self, f: impl Fn(f64) -> f64, scale: f64) -> Self {
        MomentResult {
            value: f(self.value),
            est_error: self.est_error * scale.abs(),
            ..self
        }
    }
}

fn combine(parts: &[MomentResult]) -> (MomentMethod, usize) {
    let method = if parts.iter().all(|r| r.method == MomentMethod::Series) {
        MomentMethod::Series
    } else {
        MomentMethod::Quadrature
    };
    (method, parts.iter().map(|r| r.terms_used).sum())
}

fn with_fallback(
    series: Result<MomentResult>,
    quad: impl FnOnce() -> Result<MomentResult>,
) -> Result<MomentResult> {
    match series {
        Err(EwlError::NonConvergence { .. }) => quad(),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// series machinery

/// Accumulated series value with its error budget.
#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    value: f64,
    terms: usize,
    abs_sum: f64,
    error: f64,
}

impl Partial {
    fn add_scaled(&mut self, w: f64, other: &Partial) {
        self.value += w * other.value;
        self.abs_sum += w.abs() * other.abs_sum;
        self.error += w.abs() * other.error;
        self.terms += other.terms;
    }

    fn rounding(&self) -> f64 {
        self.abs_sum * f64::EPSILON
    }

    fn check_rounding(mut self, policy: &SeriesPolicy) -> Result<Self> {
        let r = self.rounding();
        if r > policy.max_rel_rounding * self.value.abs() {
            return Err(EwlError::NonConvergence {
                terms: self.terms,
                reason: format!(
                    "cancellation: rounding error {r:e} exceeds tolerance for value {:e}",
                    self.value
                ),
            });
        }
        self.error += r;
        Ok(self)
    }
}

/// Which incomplete-gamma factor multiplies each binomial term.
#[derive(Debug, Clone, Copy)]
enum Window {
    Full,
    /// `∫_0^b`, with `tau = (βb)^γ`.
    Below(f64),
    /// `∫_t^∞`, with `tau = (βt)^γ`.
    Above(f64),
}

impl Window {
    fn factor(&self, s: f64, x: f64) -> Result<f64> {
        match *self {
            Window::Full => Ok(ln_gamma_unchecked(s).exp()),
            Window::Below(tau) => lower_incomplete_gamma(s, x * tau),
            Window::Above(tau) => upper_incomplete_gamma(s, x * tau),
        }
    }
}

/// `Σ_{j ≥ start} (-1)^j C(a, j) (j + off)^{-s} G(s; (j + off) τ)`.
struct BinomialSeries {
    a: f64,
    start: usize,
    off: f64,
    s: f64,
    window: Window,
}

/// Direct terms summed before a power-law tail is closed off analytically.
const DIRECT_TERMS: usize = 256;

impl BinomialSeries {
    fn term(&self, sign_binom: f64, j: usize) -> Result<f64> {
        let x = j as f64 + self.off;
        Ok(sign_binom * (-self.s * x.ln()).exp() * self.window.factor(self.s, x)?)
    }

    fn sum(&self, policy: &SeriesPolicy) -> Result<Partial> {
        let a = self.a;
        let finite = a >= 0.0 && a.fract() == 0.0;
        // (-1)^j C(a, j), advanced incrementally
        let mut sb = 1.0;
        for j in 0..self.start {
            sb *= -(a - j as f64) / (j as f64 + 1.0);
        }
        let mut out = Partial::default();
        let mut quiet = 0usize;
        let switch = if finite {
            usize::MAX
        } else {
            DIRECT_TERMS.max(a.ceil() as usize + 2)
        };
        let mut j = self.start;
        loop {
            if finite && j as f64 > a {
                return Ok(out);
            }
            if j - self.start >= policy.max_terms_per_index {
                return Err(EwlError::NonConvergence {
                    terms: out.terms,
                    reason: "binomial series hit the term cap".into(),
                });
            }
            if j >= switch {
                let tail = self.tail(sb, j)?;
                out.value += tail.0;
                out.abs_sum += tail.0.abs();
                out.error += tail.1;
                return Ok(out);
            }
            let t = self.term(sb, j)?;
            if !t.is_finite() {
                return Err(EwlError::NonConvergence {
                    terms: out.terms,
                    reason: format!("binomial term {j} is not finite"),
                });
            }
            out.value += t;
            out.abs_sum += t.abs();
            out.terms += 1;
            if t.abs() <= policy.rel_tol * out.value.abs() + policy.abs_tol {
                quiet += 1;
                if quiet >= policy.stagnation_window && !finite && j as f64 > a {
                    return Ok(out);
                }
            } else {
                quiet = 0;
            }
            sb *= -(a - j as f64) / (j as f64 + 1.0);
            j += 1;
        }
    }

    /// Euler–Maclaurin estimate of `Σ_{j ≥ J}` once the terms are
    /// single-signed and smooth in `j`. Returns (tail, error estimate).
    fn tail(&self, sb: f64, big_j: usize) -> Result<(f64, f64)> {
        let jf = big_j as f64;
        let anchor = self.term(sb, big_j)?;
        if anchor == 0.0 {
            return Ok((0.0, 0.0));
        }
        let g_j = self.window.factor(self.s, jf + self.off)?;
        let (a, s, off) = (self.a, self.s, self.off);
        let base = ln_gamma_ratio(jf, -a, 1.0);
        let ratio = |x: f64| -> f64 {
            let g = self.window.factor(s, x + off).unwrap_or(0.0) / g_j;
            let ln = ln_gamma_ratio(x, -a, 1.0) - base - s * ((x + off) / (jf + off)).ln();
            ln.exp() * g
        };
        let tol = QuadTolerance {
            rel: 1e-11,
            ..QuadTolerance::default()
        };
        // on the log scale x = J e^t a power-law tail decays exponentially in t
        let on_log_scale = |t: f64| {
            if t > 700.0 {
                0.0
            } else {
                let x = jf * t.exp();
                x * ratio(x)
            }
        };
        let integral = integrate_to_infinity(on_log_scale, 0.0, &tol).map_err(|e| {
            EwlError::NonConvergence {
                terms: big_j,
                reason: format!("binomial tail: {e}"),
            }
        })?;
        let h = 0.01 * jf;
        let slope = (ratio(jf + h) - ratio(jf - h)) / (2.0 * h);
        let tail = anchor * (integral.value + 0.5 - slope / 12.0);
        let err = anchor.abs() * (integral.abs_error + 1e-3 * (slope / 12.0).abs());
        Ok((tail, err))
    }
}

/// `∫_window y^pow f(y) dy` by the logarithmic-binomial double series.
fn power_integral(p: &EwlParams, pow: f64, window: Window, policy: &SeriesPolicy) -> Result<Partial> {
    policy.validate()?;
    let (alpha, beta, gamma, theta) = (p.alpha(), p.beta(), p.gamma(), p.theta());
    let s = 1.0 + pow / gamma;
    let prefactor = alpha * theta / (-p.ln_one_minus_theta()) * beta.powf(-pow);
    // |n-th inner integral| <= u_b^{nα-1} G0 once nα >= 1
    let (g0, u_b) = match window {
        Window::Full => (ln_gamma_unchecked(s).exp(), 1.0),
        Window::Above(tau) => (upper_incomplete_gamma(s, tau)?, 1.0),
        Window::Below(tau) => (lower_incomplete_gamma(s, tau)?, -(-tau).exp_m1()),
    };
    let rho = theta * u_b.powf(alpha);
    let mut acc = Partial::default();
    for n in 1..=policy.max_terms_per_index {
        let nf = n as f64;
        let inner = BinomialSeries {
            a: nf * alpha - 1.0,
            start: 0,
            off: 1.0,
            s,
            window,
        }
        .sum(policy)?;
        acc.add_scaled(theta.powi(n as i32 - 1), &inner);
        if nf * alpha >= 1.0 {
            let bound = g0 * u_b.powf(alpha - 1.0) * rho.powi(n as i32) / (1.0 - rho);
            if bound <= policy.rel_tol * acc.value.abs() + policy.abs_tol {
                acc.error += bound;
                let acc = acc.check_rounding(policy)?;
                return Ok(Partial {
                    value: acc.value * prefactor,
                    error: acc.error * prefactor.abs(),
                    abs_sum: acc.abs_sum * prefactor.abs(),
                    ..acc
                });
            }
        }
    }
    Err(EwlError::NonConvergence {
        terms: acc.terms,
        reason: "outer logarithmic series hit the term cap".into(),
    })
}

fn tau(p: &EwlParams, y: f64) -> f64 {
    (p.gamma() * (p.beta().ln() + y.ln())).exp()
}

// ---------------------------------------------------------------------------
// quadrature machinery

fn quad_tol() -> QuadTolerance {
    QuadTolerance {
        rel: 1e-11,
        ..QuadTolerance::default()
    }
}

/// Integrates `h` over `[lo, hi]` (or `[lo, ∞)`) on the support of `p`,
/// splitting at quantiles and `breaks`. `lead` is the exponent `e` in
/// `h(y) ~ y^e` at the origin; it sets a power substitution on the first
/// piece when `lo == 0`.
fn support_integral<H: Fn(f64) -> f64>(
    p: &EwlParams,
    h: H,
    lo: f64,
    hi: Option<f64>,
    lead: f64,
    breaks: &[f64],
) -> Result<QuadResult> {
    let upper = hi.unwrap_or(f64::INFINITY);
    let mut points = vec![lo];
    let mut inner: Vec<f64> = [0.01, 0.5, 0.99]
        .iter()
        .filter_map(|&q| p.quantile(q).ok())
        .chain(breaks.iter().copied())
        .filter(|&b| b > lo && b < upper && b.is_finite())
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    points.extend(inner);
    if let Some(b) = hi {
        points.push(b);
    }
    let tol = quad_tol();
    let mut total = QuadResult {
        value: 0.0,
        abs_error: 0.0,
        evals: 0,
    };
    let mut add = |r: QuadResult| {
        total.value += r.value;
        total.abs_error += r.abs_error;
        total.evals += r.evals;
    };
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == 0.0 {
            if !(lead > -1.0) {
                return Err(EwlError::Quadrature(format!(
                    "integrand behaves like y^{lead} at the origin and is not integrable"
                )));
            }
            let m = (2.0 / (lead + 1.0)).clamp(1.0, 40.0);
            let g = |v: f64| {
                let y = b * v.powf(m);
                if y > 0.0 {
                    h(y) * b * m * v.powf(m - 1.0)
                } else {
                    0.0
                }
            };
            add(integrate(g, 0.0, 1.0, &tol)?);
        } else {
            add(integrate(&h, a, b, &tol)?);
        }
    }
    if hi.is_none() {
        let start = *points.last().expect("at least the lower limit");
        let scale = if start > 0.0 { start } else { 1.0 };
        let g = |v: f64| h(start + scale * v) * scale;
        add(integrate_to_infinity(g, 0.0, &tol)?);
    }
    if !total.value.is_finite() {
        return Err(EwlError::Quadrature("non-finite integral".into()));
    }
    Ok(total)
}

fn density(p: &EwlParams, y: f64) -> f64 {
    if y > 0.0 {
        p.ln_pdf(y).map(f64::exp).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// `αγ - 1`, the power of `y` in `f(y)` near the origin.
fn pdf_lead(p: &EwlParams) -> f64 {
    p.alpha() * p.gamma() - 1.0
}

fn power_integral_quad(p: &EwlParams, pow: f64, lo: f64, hi: Option<f64>) -> Result<QuadResult> {
    support_integral(p, |y| y.powf(pow) * density(p, y), lo, hi, pdf_lead(p) + pow, &[])
}

// ---------------------------------------------------------------------------
// raw moments and mgf

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(EwlError::domain("moment order must be at least 1"));
    }
    Ok(())
}

/// `E(Y^k)` from the double series only; `NonConvergence` is returned, not
/// handled.
pub fn raw_moment_series(p: &EwlParams, k: u32, policy: &SeriesPolicy) -> Result<MomentResult> {
    check_k(k)?;
    let s = power_integral(p, k as f64, Window::Full, policy)?;
    Ok(MomentResult::series(s, 1.0))
}

/// `E(Y^k)` by adaptive quadrature of `y^k f(y)`.
pub fn raw_moment_quadrature(p: &EwlParams, k: u32) -> Result<MomentResult> {
    check_k(k)?;
    Ok(MomentResult::quad(power_integral_quad(p, k as f64, 0.0, None)?))
}

/// `E(Y^k)`: series first, quadrature if the series cannot be trusted.
pub fn raw_moment(p: &EwlParams, k: u32, policy: &SeriesPolicy) -> Result<MomentResult> {
    with_fallback(raw_moment_series(p, k, policy), || raw_moment_quadrature(p, k))
}

/// Mean and variance.
pub fn mean_and_variance(p: &EwlParams, policy: &SeriesPolicy) -> Result<(f64, f64)> {
    let m1 = raw_moment(p, 1, policy)?.value;
    let m2 = raw_moment(p, 2, policy)?.value;
    let var = m2 - m1 * m1;
    if var > 1e-8 * m1 * m1 {
        return Ok((m1, var));
    }
    // too much cancellation in m2 - m1²; integrate the centered square
    let r = support_integral(
        p,
        |y| (y - m1).powi(2) * density(p, y),
        0.0,
        None,
        pdf_lead(p),
        &[m1],
    )?;
    Ok((m1, r.value))
}

/// Moment generating function `Σ_k t^k E(Y^k) / k!`.
///
/// The moment sum diverges for `γ < 1` (any `t ≠ 0`) and for `γ = 1`,
/// `t ≥ β`; both surface as `NonConvergence`.
pub fn mgf(p: &EwlParams, t: f64, policy: &SeriesPolicy) -> Result<f64> {
    if !t.is_finite() {
        return Err(EwlError::domain("mgf argument must be finite"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let cap = policy.max_terms_per_index.min(400);
    let mut growth = 0usize;
    let mut prev = f64::INFINITY;
    let mut failure: Option<EwlError> = None;
    let inner = SeriesPolicy {
        max_terms_per_index: cap,
        ..*policy
    };
    let term = |k: usize| -> f64 {
        if failure.is_some() {
            return f64::NAN;
        }
        if k == 0 {
            return 1.0;
        }
        let ln_coef = k as f64 * t.abs().ln() - ln_gamma_unchecked(k as f64 + 1.0);
        let m = match raw_moment(p, k as u32, policy) {
            Ok(m) => m.value,
            Err(e) => {
                failure = Some(e);
                return f64::NAN;
            }
        };
        let sign = if t < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        let v = sign * (ln_coef + m.ln()).exp();
        if v.abs() >= prev {
            growth += 1;
        } else {
            growth = 0;
        }
        prev = v.abs();
        if growth >= 25 {
            return f64::INFINITY;
        }
        v
    };
    match truncated_sum(term, &inner) {
        Ok(s) => Ok(s.value),
        Err(e) => Err(match failure {
            Some(f) => f,
            None => EwlError::NonConvergence {
                terms: cap,
                reason: format!("moment series for the mgf diverges at t = {t} ({e})"),
            },
        }),
    }
}

// ---------------------------------------------------------------------------
// residual life

fn binom_int(r: u32, i: u32) -> f64 {
    (0..i).fold(1.0, |c, m| c * (r - m) as f64 / (m + 1) as f64)
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(EwlError::domain(format!("requires finite t > 0, got {t}")));
    }
    Ok(())
}

/// `m_r(t) = E[(Y - t)^r | Y > t]`.
pub fn residual_moment(p: &EwlParams, r: u32, t: f64, policy: &SeriesPolicy) -> Result<MomentResult> {
    check_k(r)?;
    check_t(t)?;
    let surv = p.survival(t);
    if !(surv > 1e-300) {
        return Err(EwlError::domain(format!("survival underflows at t = {t}")));
    }
    let series = || -> Result<MomentResult> {
        let window = Window::Above(tau(p, t));
        let mut acc = Partial::default();
        for i in 0..=r {
            let coef = binom_int(r, i) * (-t).powi((r - i) as i32);
            let part = if i == 0 {
                Partial {
                    value: surv,
                    ..Partial::default()
                }
            } else {
                power_integral(p, i as f64, window, policy)?
            };
            acc.add_scaled(coef, &part);
        }
        let acc = acc.check_rounding(policy)?;
        Ok(MomentResult::series(acc, 1.0 / surv))
    };
    with_fallback(series(), || {
        let q = support_integral(
            p,
            |y| (y - t).powi(r as i32) * density(p, y),
            t,
            None,
            0.0,
            &[],
        )?;
        Ok(MomentResult::quad(q).map(|v| v / surv, 1.0 / surv))
    })
}

/// Mean residual life `E[Y - t | Y > t]`.
pub fn mean_residual_life(p: &EwlParams, t: f64, policy: &SeriesPolicy) -> Result<MomentResult> {
    residual_moment(p, 1, t, policy)
}

/// `μ_r(t) = E[(t - Y)^r | Y <= t]`.
pub fn reversed_residual_moment(
    p: &EwlParams,
    r: u32,
    t: f64,
    policy: &SeriesPolicy,
) -> Result<MomentResult> {
    check_k(r)?;
    check_t(t)?;
    let cdf = p.cdf(t);
    if !(cdf > 1e-300) {
        return Err(EwlError::domain(format!("cdf underflows at t = {t}")));
    }
    let series = || -> Result<MomentResult> {
        let window = Window::Below(tau(p, t));
        let mut acc = Partial::default();
        for i in 0..=r {
            let coef = binom_int(r, i) * t.powi((r - i) as i32) * if i % 2 == 1 { -1.0 } else { 1.0 };
            let part = if i == 0 {
                Partial {
                    value: cdf,
                    ..Partial::default()
                }
            } else {
                power_integral(p, i as f64, window, policy)?
            };
            acc.add_scaled(coef, &part);
        }
        let acc = acc.check_rounding(policy)?;
        Ok(MomentResult::series(acc, 1.0 / cdf))
    };
    with_fallback(series(), || {
        let q = support_integral(
            p,
            |y| (t - y).powi(r as i32) * density(p, y),
            0.0,
            Some(t),
            pdf_lead(p),
            &[],
        )?;
        Ok(MomentResult::quad(q).map(|v| v / cdf, 1.0 / cdf))
    })
}

// ---------------------------------------------------------------------------
// mean deviations and inequality curves

/// `I(x) = ∫_0^x y f(y) dy`, the incomplete first moment.
pub fn incomplete_first_moment(p: &EwlParams, x: f64, policy: &SeriesPolicy) -> Result<MomentResult> {
    check_t(x)?;
    with_fallback(
        power_integral(p, 1.0, Window::Below(tau(p, x)), policy).map(|s| MomentResult::series(s, 1.0)),
        || Ok(MomentResult::quad(power_integral_quad(p, 1.0, 0.0, Some(x))?)),
    )
}

/// Mean deviations about the mean and about the median.
pub fn mean_deviations(p: &EwlParams, policy: &SeriesPolicy) -> Result<(MomentResult, MomentResult)> {
    let mu = raw_moment(p, 1, policy)?;
    let median = p.quantile(0.5)?;
    let i_mu = incomplete_first_moment(p, mu.value, policy)?;
    let i_med = incomplete_first_moment(p, median, policy)?;
    let (m1, t1) = combine(&[mu, i_mu]);
    let d1 = MomentResult {
        value: 2.0 * mu.value * p.cdf(mu.value) - 2.0 * i_mu.value,
        method: m1,
        terms_used: t1,
        est_error: 2.0 * (mu.est_error + i_mu.est_error),
    };
    let (m2, t2) = combine(&[mu, i_med]);
    let d2 = MomentResult {
        value: mu.value - 2.0 * i_med.value,
        method: m2,
        terms_used: t2,
        est_error: mu.est_error + 2.0 * i_med.est_error,
    };
    Ok((d1, d2))
}

/// Bonferroni curve `B_F[F(x)] = I(x) / (μ F(x))`.
pub fn bonferroni(p: &EwlParams, x: f64, policy: &SeriesPolicy) -> Result<MomentResult> {
    check_t(x)?;
    let cdf = p.cdf(x);
    if !(cdf > 1e-300) {
        return Err(EwlError::domain(format!("cdf underflows at x = {x}")));
    }
    let l = lorenz(p, x, policy)?;
    Ok(l.map(|v| v / cdf, 1.0 / cdf))
}

/// Lorenz curve `L_F[F(x)] = I(x) / μ`.
pub fn lorenz(p: &EwlParams, x: f64, policy: &SeriesPolicy) -> Result<MomentResult> {
    check_t(x)?;
    let mu = raw_moment(p, 1, policy)?;
    let i = incomplete_first_moment(p, x, policy)?;
    let (method, terms) = combine(&[mu, i]);
    Ok(MomentResult {
        value: i.value / mu.value,
        method,
        terms_used: terms,
        est_error: i.est_error / mu.value + i.value * mu.est_error / (mu.value * mu.value),
    })
}

/// `∫_0^t S(u) du` by the logarithmic-binomial expansion of `S`.
fn survival_integral_series(p: &EwlParams, t: f64, policy: &SeriesPolicy) -> Result<Partial> {
    policy.validate()?;
    let (alpha, beta, gamma, theta) = (p.alpha(), p.beta(), p.gamma(), p.theta());
    let window = Window::Below(tau(p, t));
    let mut acc = Partial::default();
    for k in 1..=policy.max_terms_per_index {
        let kf = k as f64;
        let inner = BinomialSeries {
            a: alpha * kf,
            start: 1,
            off: 0.0,
            s: 1.0 / gamma,
            window,
        }
        .sum(policy)?;
        acc.add_scaled(theta.powi(k as i32) / kf, &inner);
        // |inner_k| <= γβt
        let bound = gamma * beta * t * theta.powi(k as i32 + 1) / ((kf + 1.0) * (1.0 - theta));
        if bound <= policy.rel_tol * acc.value.abs() + policy.abs_tol {
            acc.error += bound;
            let acc = acc.check_rounding(policy)?;
            let scale = 1.0 / (gamma * beta * p.ln_one_minus_theta());
            return Ok(Partial {
                value: acc.value * scale,
                error: acc.error * scale.abs(),
                abs_sum: acc.abs_sum * scale.abs(),
                ..acc
            });
        }
    }
    Err(EwlError::NonConvergence {
        terms: acc.terms,
        reason: "total-time-on-test series hit the term cap".into(),
    })
}

/// Scaled total time on test transform `(1/μ) ∫_0^t S(u) du`.
pub fn scaled_ttt(p: &EwlParams, t: f64, policy: &SeriesPolicy) -> Result<MomentResult> {
    check_t(t)?;
    let mu = raw_moment(p, 1, policy)?;
    let integral = with_fallback(
        survival_integral_series(p, t, policy).map(|s| MomentResult::series(s, 1.0)),
        || {
            let q = support_integral(p, |u| p.survival(u), 0.0, Some(t), 0.0, &[])?;
            Ok(MomentResult::quad(q))
        },
    )?;
    let (method, terms) = combine(&[mu, integral]);
    Ok(MomentResult {
        value: integral.value / mu.value,
        method,
        terms_used: terms,
        est_error: integral.est_error / mu.value
            + integral.value * mu.est_error / (mu.value * mu.value),
    })
}

/// Gini index `1 - ∫ S_F[F(t)] f(t) dt`, integrated in probability scale.
pub fn gini(p: &EwlParams, policy: &SeriesPolicy) -> Result<MomentResult> {
    let all_series = std::cell::Cell::new(true);
    let terms = std::cell::Cell::new(0usize);
    let failure = std::cell::RefCell::new(None);
    let integrand = |v: f64| -> f64 {
        let t = match p.quantile(v) {
            Ok(t) if t > 0.0 => t,
            _ => return if v > 0.5 { 1.0 } else { 0.0 },
        };
        if !t.is_finite() {
            return 1.0;
        }
        match scaled_ttt(p, t, policy) {
            Ok(r) => {
                if r.method != MomentMethod::Series {
                    all_series.set(false);
                }
                terms.set(terms.get() + r.terms_used);
                r.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let tol = QuadTolerance {
        rel: 1e-9,
        abs: 1e-12,
        ..QuadTolerance::default()
    };
    let c = integrate(integrand, 0.0, 1.0, &tol)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(MomentResult {
        value: 1.0 - c.value,
        method: if all_series.get() {
            MomentMethod::Series
        } else {
            MomentMethod::Quadrature
        },
        terms_used: terms.get(),
        est_error: c.abs_error,
    })
}

// ---------------------------------------------------------------------------
// entropy

fn check_renyi(p: &EwlParams, r: f64) -> Result<()> {
    if !(r > 0.0) || r == 1.0 || !r.is_finite() {
        return Err(EwlError::domain(format!("Rényi order must be positive and not 1, got {r}")));
    }
    if !(r * (p.gamma() - 1.0) + 1.0 > 0.0) {
        return Err(EwlError::domain("r(γ - 1) + 1 must be positive"));
    }
    if !(r * pdf_lead(p) > -1.0) {
        return Err(EwlError::domain("f^r is not integrable at the origin"));
    }
    Ok(())
}

/// `∫ f^r` by the negative-binomial / binomial double series.
fn density_power_series(p: &EwlParams, r: f64, policy: &SeriesPolicy) -> Result<Partial> {
    policy.validate()?;
    let (alpha, beta, gamma, theta) = (p.alpha(), p.beta(), p.gamma(), p.theta());
    let q = (r * (gamma - 1.0) + 1.0) / gamma;
    let inner_bound = ln_gamma_unchecked(q).exp() * r.powf(-q);
    let ln_gamma_r = ln_gamma_unchecked(r);
    let coef = |j: usize| -> f64 {
        let jf = j as f64;
        (jf * theta.ln() + ln_gamma_unchecked(r + jf) - ln_gamma_unchecked(jf + 1.0) - ln_gamma_r).exp()
    };
    let mut acc = Partial::default();
    for j in 0..policy.max_terms_per_index {
        let jf = j as f64;
        let a = alpha * (r + jf) - r;
        let inner = BinomialSeries {
            a,
            start: 0,
            off: r,
            s: q,
            window: Window::Full,
        }
        .sum(policy)?;
        acc.add_scaled(coef(j), &inner);
        let next_a = alpha * (r + jf + 1.0) - r;
        let ratio = theta * ((r + jf + 1.0) / (jf + 2.0)).max(1.0);
        if next_a >= 0.0 && ratio < 1.0 {
            let bound = coef(j + 1) * inner_bound / (1.0 - ratio);
            if bound <= policy.rel_tol * acc.value.abs() + policy.abs_tol {
                acc.error += bound;
                let acc = acc.check_rounding(policy)?;
                let c = alpha * theta / (-p.ln_one_minus_theta());
                let scale = (r * c.ln() + (r - 1.0) * (gamma * beta).ln()).exp();
                return Ok(Partial {
                    value: acc.value * scale,
                    error: acc.error * scale,
                    abs_sum: acc.abs_sum * scale,
                    ..acc
                });
            }
        }
    }
    Err(EwlError::NonConvergence {
        terms: acc.terms,
        reason: "entropy series hit the term cap".into(),
    })
}

/// `∫ f^r` by quadrature.
pub fn density_power_integral_quadrature(p: &EwlParams, r: f64) -> Result<f64> {
    let h = |y: f64| {
        if y > 0.0 {
            p.ln_pdf(y).map(|l| (r * l).exp()).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    Ok(support_integral(p, h, 0.0, None, r * pdf_lead(p), &[])?.value)
}

/// Rényi entropy `log(∫ f^r) / (1 - r)`.
pub fn renyi_entropy(p: &EwlParams, r: f64, policy: &SeriesPolicy) -> Result<MomentResult> {
    check_renyi(p, r)?;
    let integral = with_fallback(
        density_power_series(p, r, policy).and_then(|s| {
            if s.value > 0.0 {
                Ok(MomentResult::series(s, 1.0))
            } else {
                Err(EwlError::NonConvergence {
                    terms: s.terms,
                    reason: "non-positive density power integral".into(),
                })
            }
        }),
        || {
            Ok(MomentResult {
                value: density_power_integral_quadrature(p, r)?,
                method: MomentMethod::Quadrature,
                terms_used: 0,
                est_error: 0.0,
            })
        },
    )?;
    let scale = 1.0 / ((1.0 - r) * integral.value);
    Ok(integral.map(|v| v.ln() / (1.0 - r), scale))
}

/// Shannon entropy `E[-log f(Y)]` by quadrature.
pub fn shannon_entropy(p: &EwlParams) -> Result<f64> {
    let h = |y: f64| match p.ln_pdf(y) {
        Ok(l) if l.is_finite() => -l * l.exp(),
        _ => 0.0,
    };
    Ok(support_integral(p, h, 0.0, None, pdf_lead(p), &[])?.value)
}
