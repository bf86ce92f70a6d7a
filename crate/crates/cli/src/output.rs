//! The structured output schema and plain-text tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ewlkit::gof::ModelRow;
use ewlkit::{EwlParams, FamilyId, FitResult, GofReport, LrTestResult};
use serde::{Deserialize, Serialize};

pub const PARAM_NAMES: [&str; 4] = ["alpha", "beta", "gamma", "theta"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl From<&EwlParams> for ParamSet {
    fn from(p: &EwlParams) -> Self {
        ParamSet {
            alpha: p.alpha(),
            beta: p.beta(),
            gamma: p.gamma(),
            theta: p.theta(),
        }
    }
}

/// Fit summary emitted by `fit --format machine` and read back by
/// `curves --from` and `gof --from`. Only `family` and `params` are needed
/// on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub family: FamilyId,
    pub params: ParamSet,
    /// Standard errors of the free parameters; `null` when the observed
    /// information is singular.
    #[serde(default)]
    pub stderr: BTreeMap<String, Option<f64>>,
    #[serde(default)]
    pub loglik: Option<f64>,
    #[serde(default)]
    pub aic: Option<f64>,
    #[serde(default)]
    pub gof: Option<GofReport>,
    /// Parameters held fixed by the family.
    #[serde(default)]
    pub fixed: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub n: usize,
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    pub boundary: bool,
}

pub fn fixed_names(family: FamilyId) -> Vec<String> {
    let free = family.free_indices();
    (0..4)
        .filter(|i| !free.contains(i))
        .map(|i| PARAM_NAMES[i].to_string())
        .collect()
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl FitRecord {
    pub fn from_fit(fit: &FitResult, gof: Option<GofReport>) -> Self {
        let stderr = fit
            .family
            .free_indices()
            .iter()
            .zip(&fit.std_errors)
            .map(|(&i, &se)| (PARAM_NAMES[i].to_string(), finite(se)))
            .collect();
        FitRecord {
            family: fit.family,
            params: ParamSet::from(&fit.params),
            stderr,
            loglik: finite(fit.loglik),
            aic: finite(fit.aic),
            gof,
            fixed: fixed_names(fit.family),
            fit: Some(FitInfo {
                n: fit.n_obs,
                method: fit.method.to_string(),
                iterations: fit.iterations,
                converged: fit.converged,
                boundary: fit.boundary,
            }),
        }
    }
}

fn gof_line(g: &GofReport) -> String {
    format!(
        "K-S {:.4} (p {:.4})   AD {:.4} (raw {:.4})   CM {:.4} (raw {:.4})",
        g.ks, g.ks_pvalue, g.ad, g.ad_raw, g.cm, g.cm_raw
    )
}

pub fn fit_table(fit: &FitResult, gof: Option<&GofReport>) -> String {
    let mut s = String::new();
    let status = if fit.converged {
        "converged".to_string()
    } else if fit.boundary {
        "theta on the boundary".to_string()
    } else {
        "not converged".to_string()
    };
    let _ = writeln!(
        s,
        "{}  n = {}  method {}  {} iterations, {}",
        fit.family, fit.n_obs, fit.method, fit.iterations, status
    );
    let _ = writeln!(s, "{:<8}{:>14}{:>14}", "param", "estimate", "std.err");
    let free = fit.family.free_indices();
    let all = fit.params.as_array();
    for (i, name) in PARAM_NAMES.iter().enumerate() {
        if let Some(k) = free.iter().position(|&j| j == i) {
            let se = fit.std_errors.get(k).copied().unwrap_or(f64::NAN);
            let se = if se.is_finite() { format!("{se:.6}") } else { "-".into() };
            let _ = writeln!(s, "{name:<8}{:>14.6}{se:>14}", all[i]);
        } else if i == 3 {
            let _ = writeln!(s, "{name:<8}{:>14}{:>14}", "-> 0", "(fixed)");
        } else {
            let _ = writeln!(s, "{name:<8}{:>14}{:>14}", all[i], "(fixed)");
        }
    }
    let _ = writeln!(s, "-2logL {:.4}   AIC {:.4}", -2.0 * fit.loglik, fit.aic);
    if let Some(g) = gof {
        let _ = writeln!(s, "{}", gof_line(g));
    }
    s
}

pub fn gof_table(family: FamilyId, g: &GofReport, loglik: f64) -> String {
    format!(
        "{family}  n = {}\n-2logL {:.4}   AIC {:.4}\n{}\n",
        g.n,
        -2.0 * loglik,
        g.aic,
        gof_line(g)
    )
}

fn estimates(fit: &FitResult) -> String {
    let all = fit.params.as_array();
    fit.family
        .free_indices()
        .iter()
        .zip(&fit.std_errors)
        .map(|(&i, se)| {
            if se.is_finite() {
                format!("{}={:.4}({:.4})", PARAM_NAMES[i], all[i], se)
            } else {
                format!("{}={:.4}(-)", PARAM_NAMES[i], all[i])
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn model_table(rows: &[ModelRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8}{:>11}{:>11}{:>9}{:>9}{:>9}{:>9}  estimates(std.err)",
        "family", "-2logL", "AIC", "K-S", "p", "AD", "CM"
    );
    for r in rows {
        match (&r.fit, &r.gof) {
            (Some(f), Some(g)) => {
                let _ = writeln!(
                    s,
                    "{:<8}{:>11.3}{:>11.3}{:>9.4}{:>9.4}{:>9.4}{:>9.4}  {}",
                    r.family.to_string(),
                    -2.0 * f.loglik,
                    g.aic,
                    g.ks,
                    g.ks_pvalue,
                    g.ad,
                    g.cm,
                    estimates(f)
                );
            }
            _ => {
                let _ = writeln!(
                    s,
                    "{:<8}  fit failed: {}",
                    r.family.to_string(),
                    r.error.as_deref().unwrap_or("unknown error")
                );
            }
        }
    }
    s
}

pub fn lr_table(tests: &[LrTestResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "likelihood-ratio tests");
    let _ = writeln!(s, "{:<18}{:>12}{:>5}{:>12}", "null vs alt", "w", "df", "p-value");
    for t in tests {
        let pair = format!("{} vs {}", t.null_family, t.alt_family);
        let p = if t.p_value < 1e-4 {
            format!("{:.3e}", t.p_value)
        } else {
            format!("{:.4}", t.p_value)
        };
        let _ = writeln!(s, "{pair:<18}{:>12.4}{:>5}{p:>12}", t.statistic, t.df);
    }
    s
}
