//! Goodness-of-fit statistics and model comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::EwlParams;
use crate::error::{EwlError, Result};
use crate::inference::{self, FitOptions, FitResult};
use crate::submodels::FamilyId;

/// Probabilities are clamped to `[U_CLAMP, 1 - U_CLAMP]` before taking logs.
pub const U_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks: f64,
    pub ks_pvalue: f64,
    /// Anderson-Darling with the small-sample correction.
    pub ad: f64,
    /// Cramér-von Mises with the small-sample correction.
    pub cm: f64,
    pub ad_raw: f64,
    pub cm_raw: f64,
    pub aic: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdCm {
    pub ad: f64,
    pub cm: f64,
    pub ad_raw: f64,
    pub cm_raw: f64,
    /// Number of probabilities that had to be clamped away from 0 or 1.
    pub clamped: usize,
}

/// Asymptotic Kolmogorov tail `P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`, 20 terms.
pub fn kolmogorov_pvalue(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=20 {
        let k = k as f64;
        let sign = if k as u32 % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * (-2.0 * k * k * lambda * lambda).exp();
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `D_n` for sorted probability-integral transforms `u_(1) ≤ … ≤ u_(n)`.
pub fn ks_from_uniforms(sorted_u: &[f64]) -> f64 {
    let n = sorted_u.len() as f64;
    sorted_u
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let i = i as f64;
            ((i + 1.0) / n - u).max(u - i / n)
        })
        .fold(0.0, f64::max)
}

fn sorted(data: &[f64]) -> Vec<f64> {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn check(data: &[f64]) -> Result<()> {
    if data.is_empty() {
        return Err(EwlError::domain("goodness-of-fit needs at least one observation"));
    }
    if data.iter().any(|y| !y.is_finite()) {
        return Err(EwlError::domain("observations must be finite"));
    }
    Ok(())
}

/// Kolmogorov-Smirnov statistic and asymptotic p-value of `family` at `p`.
pub fn ks_statistic(data: &[f64], p: &EwlParams, family: FamilyId) -> Result<(f64, f64)> {
    check(data)?;
    let u: Vec<f64> = sorted(data).iter().map(|&y| family.cdf(p, y)).collect();
    let d = ks_from_uniforms(&u);
    Ok((d, kolmogorov_pvalue((data.len() as f64).sqrt() * d)))
}

/// AD and CM from sorted `F(y_(i))` and the matching survival values `1 - F(y_(i))`.
pub fn ad_cm_from_uniforms(sorted_u: &[f64], sorted_s: &[f64]) -> AdCm {
    let n = sorted_u.len();
    let nf = n as f64;
    let mut clamped = 0;
    let mut clamp = |v: f64| {
        if v < U_CLAMP {
            clamped += 1;
            U_CLAMP
        } else {
            v
        }
    };
    let ln_f: Vec<f64> = sorted_u.iter().map(|&u| clamp(u).ln()).collect();
    let ln_s: Vec<f64> = sorted_s.iter().map(|&s| clamp(s).ln()).collect();
    let mut ad_sum = 0.0;
    let mut cm = 1.0 / (12.0 * nf);
    for i in 0..n {
        let w = (2 * i + 1) as f64;
        ad_sum += w * (ln_f[i] + ln_s[n - 1 - i]);
        cm += (sorted_u[i] - w / (2.0 * nf)).powi(2);
    }
    let ad = (-nf - ad_sum / nf).max(0.0);
    AdCm {
        ad: ad * (1.0 + 0.75 / nf + 2.25 / (nf * nf)),
        cm: cm * (1.0 + 0.5 / nf),
        ad_raw: ad,
        cm_raw: cm,
        clamped,
    }
}

/// Anderson-Darling and Cramér-von Mises statistics of `family` at `p`,
/// raw and with the small-sample correction factors.
pub fn ad_cm_statistics(data: &[f64], p: &EwlParams, family: FamilyId) -> Result<AdCm> {
    check(data)?;
    let ys = sorted(data);
    let u: Vec<f64> = ys.iter().map(|&y| family.cdf(p, y)).collect();
    let s: Vec<f64> = ys.iter().map(|&y| family.survival(p, y)).collect();
    Ok(ad_cm_from_uniforms(&u, &s))
}

/// All goodness-of-fit statistics for a fit.
pub fn gof_report(data: &[f64], fit: &FitResult) -> Result<GofReport> {
    let (ks, ks_pvalue) = ks_statistic(data, &fit.params, fit.family)?;
    let a = ad_cm_statistics(data, &fit.params, fit.family)?;
    Ok(GofReport {
        ks,
        ks_pvalue,
        ad: a.ad,
        cm: a.cm,
        ad_raw: a.ad_raw,
        cm_raw: a.cm_raw,
        aic: fit.aic,
        n: data.len(),
    })
}

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value at
/// `√(nm/(n+m))·D`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check(a)?;
    check(b)?;
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok((d, kolmogorov_pvalue((n * m / (n + m)).sqrt() * d)))
}

/// Empirical scaled total-time-on-test points `(i/n, T_i)`.
pub fn empirical_scaled_ttt(data: &[f64]) -> Result<Vec<(f64, f64)>> {
    check(data)?;
    if data.len() < 2 {
        return Err(EwlError::domain("the TTT plot needs at least two observations"));
    }
    let ys = sorted(data);
    let n = ys.len();
    let total: f64 = ys.iter().sum();
    if !(total > 0.0) {
        return Err(EwlError::Degenerate("observations sum to zero".into()));
    }
    let mut partial = 0.0;
    Ok(ys
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let i = k + 1;
            partial += y;
            (i as f64 / n as f64, (partial + (n - i) as f64 * y) / total)
        })
        .collect())
}

/// Empirical survival `S_n(t) = #{y_i > t}/n` as its jump points
/// `(y_(i), S_n(y_(i)))`, one per distinct value.
pub fn empirical_survival(data: &[f64]) -> Result<Vec<(f64, f64)>> {
    check(data)?;
    let ys = sorted(data);
    let n = ys.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, &y) in ys.iter().enumerate() {
        let s = (ys.len() - k - 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == y => last.1 = s,
            _ => out.push((y, s)),
        }
    }
    Ok(out)
}

/// Evaluates a step function from [`empirical_survival`] at `t`.
pub fn survival_at(steps: &[(f64, f64)], t: f64) -> f64 {
    match steps.iter().rposition(|&(y, _)| y <= t) {
        Some(i) => steps[i].1,
        None => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub family: FamilyId,
    pub fit: Option<FitResult>,
    pub gof: Option<GofReport>,
    pub error: Option<String>,
}

fn row(data: &[f64], family: FamilyId, opts: &FitOptions) -> ModelRow {
    let result = inference::fit(data, family, opts).and_then(|fit| gof_report(data, &fit).map(|g| (fit, g)));
    match result {
        Ok((fit, gof)) => ModelRow {
            family,
            fit: Some(fit),
            gof: Some(gof),
            error: None,
        },
        Err(e) => ModelRow {
            family,
            fit: None,
            gof: None,
            error: Some(e.to_string()),
        },
    }
}

/// Fits every family and ranks them by AIC, then AD, then CM. Families
/// with fewer constraints are warm-started from fits of families nested in
/// them. A failed fit is kept as a row with its error, listed last.
pub fn model_table(data: &[f64], families: &[FamilyId], opts: &FitOptions) -> Result<Vec<ModelRow>> {
    inference::check_data(data)?;
    if data.len() < 5 {
        return Err(EwlError::domain(format!("at least 5 observations are required, got {}", data.len())));
    }
    let mut fams: Vec<FamilyId> = Vec::new();
    for &f in families {
        if !fams.contains(&f) {
            fams.push(f);
        }
    }
    // fit the most constrained families first
    let mut levels: Vec<usize> = fams.iter().map(|f| f.constraints().len()).collect();
    levels.sort_unstable();
    levels.dedup();
    let mut rows: Vec<ModelRow> = Vec::new();
    for &level in levels.iter().rev() {
        let batch: Vec<FamilyId> = fams.iter().copied().filter(|f| f.constraints().len() == level).collect();
        let done = &rows;
        let new_rows: Vec<ModelRow> = batch
            .par_iter()
            .map(|&f| {
                let mut o = opts.clone();
                for r in done {
                    if let Some(fit) = &r.fit {
                        if fit.family.is_nested_in(&f) {
                            o.warm_starts.push(inference::lift(fit, f));
                        }
                    }
                }
                row(data, f, &o)
            })
            .collect();
        rows.extend(new_rows);
    }
    rows.sort_by(|a, b| match (&a.gof, &b.gof) {
        (Some(x), Some(y)) => x
            .aic
            .total_cmp(&y.aic)
            .then(x.ad.total_cmp(&y.ad))
            .then(x.cm.total_cmp(&y.cm)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}
