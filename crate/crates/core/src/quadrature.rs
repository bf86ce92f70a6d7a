//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{EwlError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subintervals: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        QuadTolerance {
            rel: 1e-10,
            abs: 1e-300,
            max_subintervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * half;
    if !value.is_finite() {
        return Err(EwlError::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let error = ((kron - gauss) * half).abs();
    Ok(Segment { a, b, value, error })
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &QuadTolerance) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(EwlError::Quadrature("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evals: 0,
        });
    }
    if b < a {
        return integrate(f, b, a, tol).map(|r| QuadResult {
            value: -r.value,
            ..r
        });
    }
    let first = kronrod(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_subintervals {
            return Err(EwlError::Quadrature(format!(
                "subinterval limit reached on [{a}, {b}]: value {total:e}, error {total_err:e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further; accept what we have
            heap.push(worst);
            break;
        }
        let left = kronrod(&f, worst.a, mid)?;
        let right = kronrod(&f, mid, worst.b)?;
        evals += 30;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // recompute from the segments to shed accumulated update error
    let (value, abs_error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult {
        value,
        abs_error,
        evals,
    })
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + s / (1 - s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: &QuadTolerance) -> Result<QuadResult> {
    let g = |s: f64| {
        let one_minus = 1.0 - s;
        let x = a + s / one_minus;
        let v = f(x) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, &QuadTolerance::default()).unwrap();
        assert_relative_eq!(r.value, 64.0 / 6.0 - 8.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x| x.powf(-0.6), 0.0, 1.0, &QuadTolerance::default()).unwrap();
        assert_relative_eq!(r.value, 2.5, max_relative = 1e-9);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate_to_infinity(|x| (-x).exp(), 1.0, &QuadTolerance::default()).unwrap();
        assert_relative_eq!(r.value, (-1.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn reversed_limits_negate() {
        let tol = QuadTolerance::default();
        let a = integrate(|x| x.cos(), 0.0, 1.0, &tol).unwrap().value;
        let b = integrate(|x| x.cos(), 1.0, 0.0, &tol).unwrap().value;
        assert_eq!(a, -b);
    }
}
