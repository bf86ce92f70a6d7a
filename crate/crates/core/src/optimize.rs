//! Small optimization toolkit: bracketed root finding, golden-section
//! search and BFGS.

use nalgebra::{DMatrix, DVector};

use crate::error::{EwlError, Result};

/// Brent's method for a root of `f` in `[a, b]`; `f(a)` and `f(b)` must
/// differ in sign.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(EwlError::Optimizer(format!(
            "root not bracketed on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(EwlError::Optimizer(format!("non-finite function value at {b}")));
        }
    }
    Err(EwlError::Optimizer("root finder exceeded its iteration cap".into()))
}

/// Golden-section search for a minimum of `f` on `[a, b]`. Returns `(x, f(x))`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x1 = b - R * (b - a);
    let mut x2 = a + R * (b - a);
    let finite = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    let mut f1 = finite(f(x1));
    let mut f2 = finite(f(x2));
    for _ in 0..max_iter {
        if (b - a).abs() <= tol * (1.0 + x1.abs().max(x2.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - R * (b - a);
            f1 = finite(f(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + R * (b - a);
            f2 = finite(f(x2));
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step changes `f` by less than this.
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 500,
            grad_tol: 1e-7,
            f_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` with BFGS and a backtracking Armijo line search.
///
/// `fg` returns the objective and its gradient; non-finite objective values
/// are treated as infeasible and shrink the step.
pub fn bfgs<F>(mut fg: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut fx, g) = fg(x.as_slice());
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(EwlError::Optimizer("objective is not finite at the start point".into()));
    }
    let mut g = DVector::from_vec(g);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        if g.amax() <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        if first {
            // keep the first trial step modest in the transformed space
            let norm = dir.norm();
            if norm > 1.0 {
                dir /= norm;
                slope /= norm;
            }
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + step * &dir;
            let (ft, gt) = fg(trial.as_slice());
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, DVector::from_vec(gt)));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no descent along the quasi-Newton direction; retry once from steepest descent
            if h != DMatrix::identity(n, n) {
                h = DMatrix::identity(n, n);
                first = true;
                continue;
            }
            break;
        };
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        let df = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if sy > 1e-12 * s.norm() * yv.norm() {
            if first {
                h *= sy / yv.dot(&yv);
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &s * yv.transpose();
            let right = &i - rho * &yv * s.transpose();
            h = &left * &h * &right + rho * &s * s.transpose();
            first = false;
        }
        if df.abs() <= opts.f_tol * (1.0 + fx.abs()) && g.amax() <= opts.grad_tol.sqrt() {
            converged = true;
            break;
        }
    }
    if g.amax() <= opts.grad_tol {
        converged = true;
    }
    Ok(BfgsResult {
        x: x.as_slice().to_vec(),
        f: fx,
        grad: g.as_slice().to_vec(),
        iterations,
        converged,
    })
}
