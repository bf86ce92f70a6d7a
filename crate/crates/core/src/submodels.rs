//! The sub-model lattice: restricted families, their closed forms, and
//! nesting checks for likelihood-ratio testing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{ew, EwlParams};
use crate::error::{EwlError, Result};
use crate::moments::{self, MomentMethod, MomentResult};
use crate::special::{truncated_sum, SeriesPolicy};

/// Stand-in value of `θ` for the `θ → 0` families.
pub const THETA_EPS: f64 = 1e-10;

/// A single coordinate restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    AlphaOne,
    GammaOne,
    GammaTwo,
    ThetaZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyId {
    #[serde(rename = "EWL")]
    Ewl,
    #[serde(rename = "CWL")]
    Cwl,
    #[serde(rename = "GEL")]
    Gel,
    #[serde(rename = "CEL")]
    Cel,
    #[serde(rename = "ERL")]
    Erl,
    #[serde(rename = "RL")]
    Rl,
    #[serde(rename = "EW")]
    Ew,
    Weibull,
    #[serde(rename = "GE")]
    Ge,
}

impl FamilyId {
    pub const ALL: [FamilyId; 9] = [
        FamilyId::Ewl,
        FamilyId::Cwl,
        FamilyId::Gel,
        FamilyId::Cel,
        FamilyId::Erl,
        FamilyId::Rl,
        FamilyId::Ew,
        FamilyId::Weibull,
        FamilyId::Ge,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FamilyId::Ewl => "EWL",
            FamilyId::Cwl => "CWL",
            FamilyId::Gel => "GEL",
            FamilyId::Cel => "CEL",
            FamilyId::Erl => "ERL",
            FamilyId::Rl => "RL",
            FamilyId::Ew => "EW",
            FamilyId::Weibull => "Weibull",
            FamilyId::Ge => "GE",
        }
    }

    pub fn constraints(&self) -> &'static [Constraint] {
        use Constraint::*;
        match self {
            FamilyId::Ewl => &[],
            FamilyId::Cwl => &[AlphaOne],
            FamilyId::Gel => &[GammaOne],
            FamilyId::Cel => &[AlphaOne, GammaOne],
            FamilyId::Erl => &[GammaTwo],
            FamilyId::Rl => &[AlphaOne, GammaTwo],
            FamilyId::Ew => &[ThetaZero],
            FamilyId::Weibull => &[AlphaOne, ThetaZero],
            FamilyId::Ge => &[GammaOne, ThetaZero],
        }
    }

    fn has(&self, c: Constraint) -> bool {
        self.constraints().contains(&c)
    }

    pub fn fixed_alpha(&self) -> Option<f64> {
        self.has(Constraint::AlphaOne).then_some(1.0)
    }

    pub fn fixed_gamma(&self) -> Option<f64> {
        if self.has(Constraint::GammaOne) {
            Some(1.0)
        } else if self.has(Constraint::GammaTwo) {
            Some(2.0)
        } else {
            None
        }
    }

    /// True for the `θ → 0` families evaluated on exponentiated Weibull forms.
    pub fn theta_limit(&self) -> bool {
        self.has(Constraint::ThetaZero)
    }

    /// Indices into `(α, β, γ, θ)` of the free parameters.
    pub fn free_indices(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(4);
        if self.fixed_alpha().is_none() {
            v.push(0);
        }
        v.push(1);
        if self.fixed_gamma().is_none() {
            v.push(2);
        }
        if !self.theta_limit() {
            v.push(3);
        }
        v
    }

    pub fn n_free(&self) -> usize {
        4 - self.constraints().len()
    }

    /// `self` is a strict restriction of `other`.
    pub fn is_nested_in(&self, other: &FamilyId) -> bool {
        let mine = self.constraints();
        let theirs = other.constraints();
        mine.len() > theirs.len() && theirs.iter().all(|c| mine.contains(c))
    }

    /// Degrees of freedom for testing `null` against `alt`.
    pub fn nesting_df(null: FamilyId, alt: FamilyId) -> Result<usize> {
        if null.is_nested_in(&alt) {
            Ok(alt.n_free() - null.n_free())
        } else {
            Err(EwlError::Nesting {
                null: null.name().into(),
                alt: alt.name().into(),
            })
        }
    }

    // evaluation on the family's own density; `p` should already be restricted

    pub fn ln_pdf(&self, p: &EwlParams, y: f64) -> Result<f64> {
        if self.theta_limit() {
            if !(y > 0.0) {
                return Err(EwlError::domain(format!("pdf requires y > 0, got {y}")));
            }
            Ok(ew::ln_pdf(p.alpha(), p.beta(), p.gamma(), y))
        } else {
            p.ln_pdf(y)
        }
    }

    pub fn cdf(&self, p: &EwlParams, y: f64) -> f64 {
        if self.theta_limit() {
            ew::cdf(p.alpha(), p.beta(), p.gamma(), y)
        } else {
            p.cdf(y)
        }
    }

    pub fn survival(&self, p: &EwlParams, y: f64) -> f64 {
        if self.theta_limit() {
            ew::survival(p.alpha(), p.beta(), p.gamma(), y)
        } else {
            p.survival(y)
        }
    }

    pub fn quantile(&self, p: &EwlParams, xi: f64) -> Result<f64> {
        if self.theta_limit() {
            if !(xi > 0.0 && xi < 1.0) {
                return Err(EwlError::domain(format!("quantile requires 0 < xi < 1, got {xi}")));
            }
            Ok(ew::quantile(p.alpha(), p.beta(), p.gamma(), xi))
        } else {
            p.quantile(xi)
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = EwlError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        FamilyId::ALL
            .iter()
            .copied()
            .find(|f| f.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| {
                let names: Vec<_> = FamilyId::ALL.iter().map(|f| f.name()).collect();
                EwlError::domain(format!("unknown family '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Overwrites the coordinates fixed by `f`.
pub fn restrict(p: &EwlParams, f: FamilyId) -> EwlParams {
    let alpha = f.fixed_alpha().unwrap_or(p.alpha());
    let gamma = f.fixed_gamma().unwrap_or(p.gamma());
    let theta = if f.theta_limit() { THETA_EPS } else { p.theta() };
    EwlParams::new(alpha, p.beta(), gamma, theta).expect("restriction of a valid point is valid")
}

fn closed_form_family(f: FamilyId) -> Result<()> {
    match f {
        FamilyId::Cwl | FamilyId::Gel | FamilyId::Cel => Ok(()),
        other => Err(EwlError::domain(format!(
            "closed forms are provided for CWL, GEL and CEL, not {other}"
        ))),
    }
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(EwlError::domain(format!("requires finite x > 0, got {x}")))
    }
}

/// Sub-model pdf evaluated from its own closed form.
pub fn submodel_pdf_closed(f: FamilyId, p: &EwlParams, x: f64) -> Result<f64> {
    closed_form_family(f)?;
    check_x(x)?;
    let (beta, theta) = (p.beta(), p.theta());
    let l = (-theta).ln_1p();
    Ok(match f {
        FamilyId::Cwl => {
            let g = p.gamma();
            let z = (beta * x).powf(g);
            theta * g * beta.powf(g) * x.powf(g - 1.0) * (-z).exp()
                / (l * (theta * (1.0 - (-z).exp()) - 1.0))
        }
        FamilyId::Gel => {
            let a = p.alpha();
            let e = (-beta * x).exp();
            a * theta * beta * e * (1.0 - e).powf(a - 1.0) / (l * (theta * (1.0 - e).powf(a) - 1.0))
        }
        _ => {
            let e = (-beta * x).exp();
            theta * beta * e / (l * (theta * (1.0 - e) - 1.0))
        }
    })
}

/// Sub-model cdf evaluated from its own closed form.
pub fn submodel_cdf_closed(f: FamilyId, p: &EwlParams, x: f64) -> Result<f64> {
    closed_form_family(f)?;
    check_x(x)?;
    let (beta, theta) = (p.beta(), p.theta());
    let l = (-theta).ln_1p();
    let v = match f {
        FamilyId::Cwl => 1.0 - (-(beta * x).powf(p.gamma())).exp(),
        FamilyId::Gel => (1.0 - (-beta * x).exp()).powf(p.alpha()),
        _ => 1.0 - (-beta * x).exp(),
    };
    Ok((1.0 - theta * v).ln() / l)
}

/// Sub-model hazard evaluated from its own closed form.
pub fn submodel_hazard_closed(f: FamilyId, p: &EwlParams, x: f64) -> Result<f64> {
    closed_form_family(f)?;
    check_x(x)?;
    let (beta, theta) = (p.beta(), p.theta());
    let l = (-theta).ln_1p();
    Ok(match f {
        FamilyId::Cwl => {
            let g = p.gamma();
            let z = (beta * x).powf(g);
            let v = 1.0 - (-z).exp();
            theta * g * beta.powf(g) * x.powf(g - 1.0) * (-z).exp()
                / ((theta * v - 1.0) * (l - (1.0 - theta * v).ln()))
        }
        FamilyId::Gel => {
            let a = p.alpha();
            let e = (-beta * x).exp();
            let v = (1.0 - e).powf(a);
            a * theta * beta * e * (1.0 - e).powf(a - 1.0) / ((theta * v - 1.0) * (l - (1.0 - theta * v).ln()))
        }
        _ => {
            let e = (-beta * x).exp();
            let v = 1.0 - e;
            theta * beta * e / ((theta * v - 1.0) * (l - (1.0 - theta * v).ln()))
        }
    })
}

/// Mean of CWL, GEL or CEL from the sub-model's own double series, falling
/// back to the general moment routine when the series cannot be trusted.
pub fn submodel_mean(f: FamilyId, p: &EwlParams, policy: &SeriesPolicy) -> Result<MomentResult> {
    closed_form_family(f)?;
    let q = restrict(p, f);
    match submodel_mean_series(f, &q, policy) {
        Ok(r) => Ok(r),
        Err(EwlError::NonConvergence { .. }) => {
            let r = moments::raw_moment(&q, 1, policy)?;
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

fn submodel_mean_series(f: FamilyId, p: &EwlParams, policy: &SeriesPolicy) -> Result<MomentResult> {
    let (beta, theta) = (p.beta(), p.theta());
    let (alpha, exponent, lead) = match f {
        FamilyId::Cwl => {
            let g = p.gamma();
            (1.0, 1.0 / g + 1.0, crate::special::log_gamma(1.0 + 1.0 / g)?.exp())
        }
        FamilyId::Gel => (p.alpha(), 2.0, p.alpha()),
        _ => (1.0, 2.0, 1.0),
    };
    let mut abs_total = 0.0;
    let mut terms = 0usize;
    let mut failure = None;
    let outer = truncated_sum(
        |i| {
            let n = (i + 1) as f64;
            let upper = n * alpha - 1.0;
            // (-1)^{j+1} C(nα-1, j) (j+1)^{-exponent}
            let mut c = 1.0;
            let inner = truncated_sum(
                |j| {
                    let jf = j as f64;
                    if j > 0 {
                        c *= (upper - jf + 1.0) / jf;
                    }
                    let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                    sign * c * (jf + 1.0).powf(-exponent)
                },
                policy,
            );
            match inner {
                Ok(s) => {
                    let w = theta.powi(i as i32);
                    abs_total += w * s.abs_sum;
                    terms += s.terms;
                    w * s.value
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        policy,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outer = outer?;
    if abs_total * f64::EPSILON > policy.max_rel_rounding * outer.value.abs() {
        return Err(EwlError::NonConvergence {
            terms,
            reason: "cancellation in the sub-model mean series".into(),
        });
    }
    let scale = lead * theta / (beta * (-theta).ln_1p());
    Ok(MomentResult {
        value: scale * outer.value,
        method: MomentMethod::Series,
        terms_used: terms.max(1),
        est_error: (abs_total * f64::EPSILON + policy.rel_tol * outer.value.abs()) * scale.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(a: f64, b: f64, g: f64, t: f64) -> EwlParams {
        EwlParams::new(a, b, g, t).unwrap()
    }

    #[test]
    fn restrict_examples() {
        let q = p(2.5, 0.7, 1.8, 0.4);
        assert_eq!(restrict(&q, FamilyId::Cel).as_array(), [1.0, 0.7, 1.0, 0.4]);
        assert_eq!(restrict(&q, FamilyId::Gel).as_array(), [2.5, 0.7, 1.0, 0.4]);
        assert_eq!(restrict(&q, FamilyId::Ewl), q);
        assert_eq!(restrict(&q, FamilyId::Weibull).as_array(), [1.0, 0.7, 1.8, THETA_EPS]);
        assert_eq!(restrict(&q, FamilyId::Rl).as_array(), [1.0, 0.7, 2.0, 0.4]);
    }

    #[test]
    fn free_parameter_counts() {
        let counts: Vec<usize> = FamilyId::ALL.iter().map(|f| f.n_free()).collect();
        assert_eq!(counts, vec![4, 3, 3, 2, 3, 2, 3, 2, 2]);
        for f in FamilyId::ALL {
            assert_eq!(f.free_indices().len(), f.n_free());
        }
        assert_eq!(FamilyId::Ge.free_indices(), vec![0, 1]);
    }

    #[test]
    fn nesting_lattice() {
        use FamilyId::*;
        assert_eq!(FamilyId::nesting_df(Ew, Ewl).unwrap(), 1);
        assert_eq!(FamilyId::nesting_df(Cel, Ewl).unwrap(), 2);
        assert_eq!(FamilyId::nesting_df(Cel, Gel).unwrap(), 1);
        assert_eq!(FamilyId::nesting_df(Weibull, Cwl).unwrap(), 1);
        assert_eq!(FamilyId::nesting_df(Ge, Ew).unwrap(), 1);
        assert_eq!(FamilyId::nesting_df(Rl, Erl).unwrap(), 1);
        for (a, b) in [(Cwl, Gel), (Gel, Cwl), (Ewl, Ewl), (Ewl, Cwl), (Weibull, Ge), (Erl, Gel), (Rl, Cel)] {
            assert!(matches!(FamilyId::nesting_df(a, b), Err(EwlError::Nesting { .. })), "{a} {b}");
        }
    }

    #[test]
    fn names_round_trip() {
        for f in FamilyId::ALL {
            assert_eq!(f.name().parse::<FamilyId>().unwrap(), f);
            assert_eq!(f.name().to_lowercase().parse::<FamilyId>().unwrap(), f);
        }
        assert!("WL".parse::<FamilyId>().is_err());
    }

    #[test]
    fn closed_forms_match_restricted_ewl() {
        let base = [p(2.3, 0.8, 1.7, 0.35), p(0.6, 1.5, 0.8, 0.9), p(1.0, 1.0, 1.0, 0.5)];
        for q in &base {
            for f in [FamilyId::Cwl, FamilyId::Gel, FamilyId::Cel] {
                let r = restrict(q, f);
                for &x in &[0.05, 0.3, std::f64::consts::LN_2, 1.0, 2.5] {
                    assert_relative_eq!(submodel_pdf_closed(f, q, x).unwrap(), r.pdf(x).unwrap(), max_relative = 1e-12);
                    assert_relative_eq!(submodel_cdf_closed(f, q, x).unwrap(), r.cdf(x), max_relative = 1e-12);
                    assert_relative_eq!(submodel_hazard_closed(f, q, x).unwrap(), r.hazard(x).unwrap(), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_forms_reject_other_families() {
        let q = p(1.0, 1.0, 1.0, 0.5);
        assert!(submodel_pdf_closed(FamilyId::Ewl, &q, 1.0).is_err());
        assert!(submodel_pdf_closed(FamilyId::Cel, &q, 0.0).is_err());
    }

    #[test]
    fn cel_mean_harmonic_value() {
        let m = submodel_mean(FamilyId::Cel, &p(3.0, 1.0, 2.0, 0.5), &SeriesPolicy::default()).unwrap();
        assert_eq!(m.method, MomentMethod::Series);
        assert_relative_eq!(m.value, 1.186_569_110_415_625_5, max_relative = 1e-12);
    }

    #[test]
    fn sub_model_means_agree_with_moments() {
        let pol = SeriesPolicy::default();
        for q in [p(2.0, 0.7, 1.4, 0.3), p(3.0, 1.2, 0.8, 0.2), p(1.0, 1.0, 1.0, 0.45)] {
            for f in [FamilyId::Cwl, FamilyId::Gel, FamilyId::Cel] {
                let m = submodel_mean(f, &q, &pol).unwrap().value;
                let r = moments::raw_moment(&restrict(&q, f), 1, &pol).unwrap().value;
                assert_relative_eq!(m, r, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn cwl_mean_tends_to_weibull() {
        let g: f64 = 1.7;
        let m = submodel_mean(FamilyId::Cwl, &p(1.0, 2.0, g, 1e-9), &SeriesPolicy::default()).unwrap();
        let weibull = crate::special::log_gamma(1.0 + 1.0 / g).unwrap().exp() / 2.0;
        assert_relative_eq!(m.value, weibull, max_relative = 1e-8);
    }

    #[test]
    fn theta_limit_families_use_ew_forms() {
        let q = restrict(&p(2.0, 1.0, 1.5, 0.4), FamilyId::Ew);
        let f = FamilyId::Ew;
        assert_eq!(f.cdf(&q, 1.2), ew::cdf(2.0, 1.0, 1.5, 1.2));
        assert_relative_eq!(f.cdf(&q, 1.2), q.cdf(1.2), max_relative = 1e-8);
        let x = f.quantile(&q, 0.3).unwrap();
        assert_relative_eq!(f.cdf(&q, x), 0.3, max_relative = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn closed_forms_equal_restricted_ewl(
                a in 0.2f64..8.0, b in 0.1f64..5.0, g in 0.3f64..4.0, th in 1e-4f64..0.999,
                v in 0.01f64..0.99, fi in 0usize..3,
            ) {
                let f = [FamilyId::Cwl, FamilyId::Gel, FamilyId::Cel][fi];
                let q = p(a, b, g, th);
                let r = restrict(&q, f);
                let x = r.quantile(v).unwrap();
                let pdf = r.pdf(x).unwrap();
                prop_assert!((submodel_pdf_closed(f, &q, x).unwrap() - pdf).abs() <= 1e-12 * pdf);
                prop_assert!((submodel_cdf_closed(f, &q, x).unwrap() - v).abs() <= 1e-10 * v);
                let h = r.hazard(x).unwrap();
                prop_assert!((submodel_hazard_closed(f, &q, x).unwrap() - h).abs() <= 1e-12 * h);
            }

            #[test]
            fn nesting_is_a_strict_partial_order(i in 0usize..9, j in 0usize..9, k in 0usize..9) {
                let (x, y, z) = (FamilyId::ALL[i], FamilyId::ALL[j], FamilyId::ALL[k]);
                prop_assert!(!x.is_nested_in(&x));
                prop_assert!(!(x.is_nested_in(&y) && y.is_nested_in(&x)));
                if x.is_nested_in(&y) && y.is_nested_in(&z) {
                    prop_assert!(x.is_nested_in(&z));
                }
                prop_assert_eq!(FamilyId::nesting_df(x, y).is_ok(), x.is_nested_in(&y));
            }
        }
    }
}
