//! Expectation-maximization for the EWL family and its nested submodels,
//! using the latent number of competing risks `Z` as missing data.
//!
//! Each M-step is a sequence of conditional maximizations of the expected
//! complete-data log-likelihood `Q`: `α` in closed form, `β` and `γ` by
//! bracketed root finding on their partial derivatives (checked to raise `Q`,
//! with golden-section search as a fallback), then `θ` by matching the mean
//! of the logarithmic law to the average of the `E[Z_i | y_i]`.

use super::{check_data, family_loglik, EmConfig, FitMethod, FitResult, Obs, THETA_PIN};
use crate::dist::EwlParams;
use crate::error::{EwlError, Result};
use crate::optimize::{brent_root, golden_section};
use crate::submodels::{restrict, FamilyId, THETA_EPS};

/// The part of `Q` that depends on `(β, γ)` for fixed `α` and weights `Z_i`.
fn q_beta_gamma(data: &[f64], z: &[f64], alpha: f64, beta: f64, gamma: f64) -> f64 {
    let n = data.len() as f64;
    let mut q = n * gamma.ln() + n * gamma * beta.ln();
    for (&y, &zi) in data.iter().zip(z) {
        let o = Obs::new(beta, gamma, y);
        q += (gamma - 1.0) * y.ln() - o.z + (alpha * zi - 1.0) * o.ln_u;
    }
    q
}

/// `(β/γ) ∂Q/∂β`
fn dq_beta(data: &[f64], z: &[f64], alpha: f64, beta: f64, gamma: f64) -> f64 {
    let mut s = data.len() as f64;
    for (&y, &zi) in data.iter().zip(z) {
        let o = Obs::new(beta, gamma, y);
        s += -o.z + (alpha * zi - 1.0) * o.r;
    }
    s
}

/// `∂Q/∂γ`
fn dq_gamma(data: &[f64], z: &[f64], alpha: f64, beta: f64, gamma: f64) -> f64 {
    let mut s = data.len() as f64 / gamma;
    for (&y, &zi) in data.iter().zip(z) {
        let o = Obs::new(beta, gamma, y);
        s += o.ln_by * (1.0 - o.z + (alpha * zi - 1.0) * o.r);
    }
    s
}

/// Maximizes a smooth function of `x` near `x0`: bracket a sign change of
/// its derivative `d`, solve, and keep the result only if `q` does not drop;
/// otherwise fall back to golden-section search on `q`.
fn maximize_1d<D, Q>(mut d: D, mut q: Q, x0: f64, tol: f64) -> f64
where
    D: FnMut(f64) -> f64,
    Q: FnMut(f64) -> f64,
{
    let q0 = q(x0);
    let d0 = d(x0);
    let mut candidate = None;
    if d0 == 0.0 {
        return x0;
    }
    if d0.is_finite() {
        let dir = d0.signum();
        let mut step = 0.25;
        let mut lo = x0;
        while step < 64.0 {
            let hi = x0 + dir * step;
            let dh = d(hi);
            if !dh.is_finite() {
                break;
            }
            if dh.signum() != d0.signum() {
                let (a, b) = if dir > 0.0 { (lo, hi) } else { (hi, lo) };
                candidate = brent_root(&mut d, a, b, tol, 200).ok();
                break;
            }
            lo = hi;
            step *= 2.0;
        }
    }
    if let Some(x) = candidate {
        let qx = q(x);
        if qx.is_finite() && qx >= q0 - 1e-12 * q0.abs() {
            return x;
        }
    }
    let (x, qx) = golden_section(|x| -q(x), x0 - 4.0, x0 + 4.0, tol, 300);
    if -qx > q0 {
        x
    } else {
        x0
    }
}

/// Mean of the logarithmic distribution, `θ / ((1-θ)(-log(1-θ)))`.
fn log_series_mean(theta: f64) -> f64 {
    theta / ((1.0 - theta) * -(-theta).ln_1p())
}

/// Solves `mean(θ) = z̄` on the logit scale, pinned to [`THETA_PIN`].
fn theta_update(zbar: f64, tol: f64) -> f64 {
    let (lo, hi) = THETA_PIN;
    if zbar <= log_series_mean(lo) {
        return lo;
    }
    if zbar >= log_series_mean(hi) {
        return hi;
    }
    let logit = |t: f64| (t / (1.0 - t)).ln();
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    brent_root(|x| log_series_mean(sigmoid(x)) - zbar, logit(lo), logit(hi), tol, 200)
        .map(sigmoid)
        .unwrap_or(lo)
}

/// One EM cycle: E-step at `p`, then the conditional maximizations.
fn em_map(data: &[f64], family: FamilyId, p: &EwlParams, cfg: &EmConfig) -> Result<EwlParams> {
    let n = data.len() as f64;
    let (mut a, mut b, mut g) = (p.alpha(), p.beta(), p.gamma());
    let z: Vec<f64> = if family.theta_limit() {
        vec![1.0; data.len()]
    } else {
        super::e_step(data, p)?
    };
    if family.fixed_alpha().is_none() {
        let s: f64 = data
            .iter()
            .zip(&z)
            .map(|(&y, &zi)| zi * Obs::new(b, g, y).ln_u)
            .sum();
        if s < 0.0 && s.is_finite() {
            a = -n / s;
        }
    }
    let lb = maximize_1d(
        |x| dq_beta(data, &z, a, x.exp(), g),
        |x| q_beta_gamma(data, &z, a, x.exp(), g),
        b.ln(),
        cfg.inner_solver_tol,
    );
    b = lb.exp();
    if family.fixed_gamma().is_none() {
        let lg = maximize_1d(
            |x| dq_gamma(data, &z, a, b, x.exp()) * x.exp(),
            |x| q_beta_gamma(data, &z, a, b, x.exp()),
            g.ln(),
            cfg.inner_solver_tol,
        );
        g = lg.exp();
    }
    let t = if family.theta_limit() {
        THETA_EPS
    } else {
        theta_update(z.iter().sum::<f64>() / n, cfg.inner_solver_tol)
    };
    EwlParams::new(a, b, g, t)
}

/// Free coordinates on the unconstrained scale (log, and logit for `θ`).
fn to_free(p: &EwlParams, idx: &[usize]) -> Vec<f64> {
    let v = p.as_array();
    idx.iter()
        .map(|&i| if i == 3 { (v[3] / (1.0 - v[3])).ln() } else { v[i].ln() })
        .collect()
}

fn from_free(x: &[f64], base: &EwlParams, idx: &[usize]) -> Option<EwlParams> {
    let mut v = base.as_array();
    for (&xi, &i) in x.iter().zip(idx) {
        v[i] = if i == 3 {
            (1.0 / (1.0 + (-xi).exp())).clamp(THETA_PIN.0, THETA_PIN.1)
        } else {
            xi.exp()
        };
    }
    EwlParams::from_array(v).ok()
}

/// Runs EM for `family` from `init`, accelerated by squared extrapolation
/// (SQUAREM): two EM cycles give a secant direction, the extrapolated point
/// is refined by a third cycle and kept only if it does not lower the
/// likelihood below the second plain cycle. Returns the fit and the
/// observed-data log-likelihood after every EM cycle (the first entry is at
/// `init`), which is nondecreasing.
pub fn em_fit_family(
    data: &[f64],
    family: FamilyId,
    init: &EwlParams,
    cfg: &EmConfig,
) -> Result<(FitResult, Vec<f64>)> {
    check_data(data)?;
    cfg.validate()?;
    let idx = family.free_indices();
    let mut p = restrict(init, family);
    let mut ll = family_loglik(data, &p, family)?;
    if !ll.is_finite() {
        return Err(EwlError::Optimizer("log-likelihood is not finite at the EM start".into()));
    }
    let loglik = |q: &EwlParams| -> Result<f64> {
        let v = family_loglik(data, q, family)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EwlError::Optimizer("EM produced a non-finite log-likelihood".into()))
        }
    };
    let mut trace = vec![ll];
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut step_max = 1.0;

    while iterations < cfg.max_iter {
        let p1 = em_map(data, family, &p, cfg)?;
        let ll1 = loglik(&p1)?;
        trace.push(ll1);
        iterations += 1;
        let mut next = (p1, ll1);
        if iterations < cfg.max_iter && (ll1 - ll).abs() >= cfg.loglik_tol {
            let p2 = em_map(data, family, &p1, cfg)?;
            let ll2 = loglik(&p2)?;
            trace.push(ll2);
            iterations += 1;
            next = (p2, ll2);
            if iterations < cfg.max_iter {
                let (x0, x1, x2) = (to_free(&p, &idx), to_free(&p1, &idx), to_free(&p2, &idx));
                let r: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
                let v: Vec<f64> = x2.iter().zip(&x1).zip(&r).map(|((a, b), c)| a - b - c).collect();
                let (rn, vn) = (norm(&r), norm(&v));
                if vn > 0.0 && rn > 0.0 {
                    let mut step = (-rn / vn).clamp(-step_max, -1.0);
                    if step == -step_max {
                        step_max *= 4.0;
                    }
                    // back off toward the plain EM point until the likelihood holds
                    while step < -1.0 {
                        let x: Vec<f64> = x0
                            .iter()
                            .zip(&r)
                            .zip(&v)
                            .map(|((a, b), c)| a - 2.0 * step * b + step * step * c)
                            .collect();
                        let trial = from_free(&x, &p, &idx)
                            .and_then(|q| em_map(data, family, &q, cfg).ok())
                            .and_then(|p3| loglik(&p3).ok().map(|l| (p3, l)));
                        if let Some((p3, ll3)) = trial {
                            if ll3 >= ll2 {
                                trace.push(ll3);
                                iterations += 1;
                                next = (p3, ll3);
                                break;
                            }
                        }
                        step = (step - 1.0) / 2.0;
                        if step > -1.0 - 1e-3 {
                            break;
                        }
                    }
                }
            }
        }
        let (np, nll) = next;
        let step = p
            .as_array()
            .iter()
            .zip(np.as_array())
            .map(|(x, y)| (x - y).abs() / x.abs().max(1e-12))
            .fold(0.0, f64::max);
        gap = (nll - ll).abs();
        p = np;
        ll = nll;
        if gap < cfg.loglik_tol || step < cfg.param_tol {
            converged = true;
            break;
        }
    }
    let fit = FitResult::new(family, p, ll, data.len(), FitMethod::Em, iterations, converged, gap);
    Ok((fit, trace))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_series_mean_limits() {
        assert!((log_series_mean(1e-8) - 1.0).abs() < 1e-7);
        // θ = 0.5: 0.5 / (0.5 ln 2)
        assert!((log_series_mean(0.5) - 1.0 / 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn theta_update_inverts_mean() {
        for &t in &[1e-4, 0.1, 0.5, 0.9, 0.999] {
            let got = theta_update(log_series_mean(t), 1e-14);
            assert!((got - t).abs() < 1e-9 * t.max(1e-3), "{t} -> {got}");
        }
        assert_eq!(theta_update(1.0, 1e-12), THETA_PIN.0);
    }

    #[test]
    fn maximize_1d_parabola() {
        let x = maximize_1d(|x| -2.0 * (x - 1.5), |x| -(x - 1.5) * (x - 1.5), 0.0, 1e-12);
        assert!((x - 1.5).abs() < 1e-10);
    }
}
