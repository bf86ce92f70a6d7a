//! Direct maximization of the log-likelihood with BFGS on unconstrained
//! coordinates: log for `α`, `β`, `γ` and logit for `θ`.

use super::{check_data, family_loglik, family_score, FitMethod, FitResult, THETA_PIN};
use crate::dist::EwlParams;
use crate::error::{EwlError, Result};
use crate::optimize::{bfgs, BfgsOptions};
use crate::submodels::{restrict, FamilyId};

fn logit(t: f64) -> f64 {
    (t / (1.0 - t)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn to_unconstrained(p: &EwlParams, idx: &[usize]) -> Vec<f64> {
    let v = p.as_array();
    idx.iter()
        .map(|&i| if i == 3 { logit(v[3].clamp(THETA_PIN.0, THETA_PIN.1)) } else { v[i].ln() })
        .collect()
}

/// Maps unconstrained coordinates back; `θ` beyond the pins is clamped and
/// reported through the second return value.
fn from_unconstrained(x: &[f64], base: &EwlParams, idx: &[usize]) -> Option<(EwlParams, bool)> {
    let mut v = base.as_array();
    let mut clamped = false;
    for (&xi, &i) in x.iter().zip(idx) {
        v[i] = if i == 3 {
            let t = sigmoid(xi);
            let c = t.clamp(THETA_PIN.0, THETA_PIN.1);
            clamped = c != t;
            c
        } else {
            xi.exp()
        };
    }
    EwlParams::from_array(v).ok().map(|p| (p, clamped))
}

/// BFGS fit of `family` from `init`.
pub fn direct_fit_family(data: &[f64], family: FamilyId, init: &EwlParams) -> Result<FitResult> {
    check_data(data)?;
    let n = data.len() as f64;
    let base = restrict(init, family);
    let idx = family.free_indices();
    let x0 = to_unconstrained(&base, &idx);

    let fg = |x: &[f64]| -> (f64, Vec<f64>) {
        let Some((p, clamped)) = from_unconstrained(x, &base, &idx) else {
            return (f64::INFINITY, vec![0.0; x.len()]);
        };
        let ll = match family_loglik(data, &p, family) {
            Ok(v) if v.is_finite() => v,
            _ => return (f64::INFINITY, vec![0.0; x.len()]),
        };
        let s = match family_score(data, &p, family) {
            Ok(s) => s,
            Err(_) => return (f64::INFINITY, vec![0.0; x.len()]),
        };
        let v = p.as_array();
        let g = idx
            .iter()
            .zip(&s)
            .map(|(&i, &si)| {
                let jac = match i {
                    3 if clamped => 0.0,
                    3 => v[3] * (1.0 - v[3]),
                    _ => v[i],
                };
                -si * jac / n
            })
            .collect();
        (-ll / n, g)
    };

    let opts = BfgsOptions {
        max_iter: 1000,
        grad_tol: 1e-8,
        f_tol: 1e-14,
    };
    let r = bfgs(fg, &x0, &opts)?;
    let (p, _) = from_unconstrained(&r.x, &base, &idx)
        .ok_or_else(|| EwlError::Optimizer("BFGS left the parameter space".into()))?;
    let ll = family_loglik(data, &p, family)?;
    let gap = r.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(FitResult::new(
        family,
        p,
        ll,
        data.len(),
        FitMethod::Direct,
        r.iterations,
        r.converged && gap <= opts.grad_tol,
        gap,
    ))
}
