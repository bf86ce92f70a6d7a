//! Special functions and the truncated-series evaluator shared by the
//! moment, residual-life and entropy expansions.

use std::collections::VecDeque;

use crate::error::{EwlError, Result};

/// Truncation rules for every infinite series in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPolicy {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_terms_per_index: usize,
    /// Number of consecutive small terms required before a sum is accepted.
    pub stagnation_window: usize,
    /// Largest tolerated ratio of estimated rounding error to the result.
    /// Alternating binomial sums lose digits to cancellation; past this bound
    /// the series reports `NonConvergence` so callers can switch to quadrature.
    pub max_rel_rounding: f64,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        SeriesPolicy {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_terms_per_index: 10_000,
            stagnation_window: 50,
            max_rel_rounding: 1e-9,
        }
    }
}

impl SeriesPolicy {
    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms_per_index = max_terms;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(EwlError::domain("series tolerances must be positive"));
        }
        if self.max_terms_per_index == 0 || self.stagnation_window == 0 {
            return Err(EwlError::domain(
                "series term cap and stagnation window must be at least 1",
            ));
        }
        if !(self.max_rel_rounding > 0.0) {
            return Err(EwlError::domain("max_rel_rounding must be positive"));
        }
        Ok(())
    }
}

/// Result of [`truncated_sum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
    /// Sum of absolute values of the terms; `abs_sum * EPSILON` bounds the
    /// rounding error introduced by cancellation.
    pub abs_sum: f64,
}

impl SeriesSum {
    pub fn rounding_error(&self) -> f64 {
        self.abs_sum * f64::EPSILON * (self.terms.max(1) as f64).sqrt()
    }
}

/// Sums `term(0) + term(1) + ...` until `stagnation_window` consecutive terms
/// fall below `rel_tol * |S| + abs_tol`.
pub fn truncated_sum<F>(mut term: F, policy: &SeriesPolicy) -> Result<SeriesSum>
where
    F: FnMut(usize) -> f64,
{
    policy.validate()?;
    let window = policy.stagnation_window;
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(window);
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut quiet = 0usize;

    for i in 0..policy.max_terms_per_index {
        let t = term(i);
        if !t.is_finite() {
            return Err(EwlError::NonConvergence {
                terms: i + 1,
                reason: format!("term {i} is not finite"),
            });
        }
        sum += t;
        abs_sum += t.abs();
        if recent.len() == window {
            recent.pop_front();
        }
        recent.push_back(t.abs());

        if t.abs() <= policy.rel_tol * sum.abs() + policy.abs_tol {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= window {
            let bound = policy.rel_tol * sum.abs() + policy.abs_tol;
            if recent.iter().all(|&m| m <= bound) {
                return Ok(SeriesSum {
                    value: sum,
                    terms: i + 1,
                    abs_sum,
                });
            }
        }
    }
    Err(EwlError::NonConvergence {
        terms: policy.max_terms_per_index,
        reason: "term cap reached before the tolerance was met".into(),
    })
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(EwlError::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Gamma(x) = Gamma(x + 1) / x
        return ln_gamma_unchecked(x + 1.0) - x.ln();
    }
    if x >= 10.0 {
        // Stirling series
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x);
    }
    let xm = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (xm + i as f64);
    }
    let t = xm + LANCZOS_G + 0.5;
    HALF_LN_2PI + (xm + 0.5) * t.ln() - t + acc.ln()
}

fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        - inv2
            * (1.0 / 360.0
                - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0 - inv2 * 691.0 / 360360.0)))))
}

/// `ln Γ(x + a) - ln Γ(x + b)` without cancellation for large `x`.
pub(crate) fn ln_gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    if x < 1e3 || x + a.min(b) < 10.0 {
        return ln_gamma_unchecked(x + a) - ln_gamma_unchecked(x + b);
    }
    let (xa, xb) = (x + a, x + b);
    (a - b) * x.ln() + (xa - 0.5) * (a / x).ln_1p() - (xb - 0.5) * (b / x).ln_1p() - (a - b)
        + stirling_correction(xa)
        - stirling_correction(xb)
}

const INCGAMMA_MAX_ITER: usize = 10_000;

/// Returns `(lower, upper)` unregularized incomplete gamma values.
fn incomplete_gamma_pair(s: f64, t: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(EwlError::domain(format!("incomplete gamma requires s > 0, got {s}")));
    }
    if !(t >= 0.0) {
        return Err(EwlError::domain(format!("incomplete gamma requires t >= 0, got {t}")));
    }
    let full = ln_gamma_unchecked(s).exp();
    if t == 0.0 {
        return Ok((0.0, full));
    }
    if t.is_infinite() {
        return Ok((full, 0.0));
    }
    let log_pref = s * t.ln() - t;
    if t < s + 1.0 {
        let lower = lower_series(s, t, log_pref)?;
        Ok((lower, (full - lower).max(0.0)))
    } else {
        let upper = upper_continued_fraction(s, t, log_pref)?;
        Ok(((full - upper).max(0.0), upper))
    }
}

fn lower_series(s: f64, t: f64, log_pref: f64) -> Result<f64> {
    let mut ap = s;
    let mut del = 1.0 / s;
    let mut sum = del;
    for _ in 0..INCGAMMA_MAX_ITER {
        ap += 1.0;
        del *= t / ap;
        sum += del;
        if del.abs() < sum.abs() * f64::EPSILON * 0.5 {
            return Ok(sum * log_pref.exp());
        }
    }
    Err(EwlError::NonConvergence {
        terms: INCGAMMA_MAX_ITER,
        reason: format!("lower incomplete gamma series at s={s}, t={t}"),
    })
}

fn upper_continued_fraction(s: f64, t: f64, log_pref: f64) -> Result<f64> {
    // modified Lentz
    const TINY: f64 = 1e-300;
    let mut b = t + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=INCGAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < f64::EPSILON {
            return Ok(h * log_pref.exp());
        }
    }
    Err(EwlError::NonConvergence {
        terms: INCGAMMA_MAX_ITER,
        reason: format!("upper incomplete gamma continued fraction at s={s}, t={t}"),
    })
}

/// Upper incomplete gamma `∫_t^∞ x^{s-1} e^{-x} dx`.
pub fn upper_incomplete_gamma(s: f64, t: f64) -> Result<f64> {
    incomplete_gamma_pair(s, t).map(|(_, u)| u)
}

/// Lower incomplete gamma `∫_0^t x^{s-1} e^{-x} dx`.
pub fn lower_incomplete_gamma(s: f64, t: f64) -> Result<f64> {
    incomplete_gamma_pair(s, t).map(|(l, _)| l)
}

/// Generalized binomial coefficient `a (a-1) ... (a-j+1) / j!` for real `a`.
pub fn gen_binomial(a: f64, j: u64) -> f64 {
    let mut c = 1.0;
    for i in 0..j {
        let fi = i as f64;
        // multiply before dividing: exact for integer `a` while c*(a-i) < 2^53
        c = c * (a - fi) / (fi + 1.0);
        if c == 0.0 {
            break;
        }
    }
    c
}

/// `ln(1 - e^{-z})` for `z > 0`, accurate at both ends.
pub(crate) fn ln_one_minus_exp_neg(z: f64) -> f64 {
    if z < std::f64::consts::LN_2 {
        (-(-z).exp_m1()).ln()
    } else {
        (-(-z).exp()).ln_1p()
    }
}
