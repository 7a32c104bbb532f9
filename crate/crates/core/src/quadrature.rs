//! Adaptive Gauss–Kronrod (7/15) integration.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub segments: usize,
}

/// One 15-point Kronrod rule with the embedded Gauss estimate as error.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

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

/// Globally adaptive integration over a list of breakpoints.
///
/// Each initial panel is refined by bisecting the segment with the largest
/// error estimate until `error <= max(abs_tol, rel_tol * |value|)`.
pub fn integrate_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (v, e) = gk15(&f, a, b);
        value += v;
        error += e;
        heap.push(Segment { a, b, value: v, error: e });
    }
    loop {
        if !(value.is_finite() && error.is_finite()) {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{}, {}]",
                breaks[0],
                breaks[breaks.len() - 1]
            )));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            break;
        }
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "no convergence after {} segments (estimate {value:e}, error {error:e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Quadrature(format!(
                "interval [{:e}, {:e}] exhausted with error {:e}; integrand is likely singular",
                worst.a, worst.b, worst.error
            )));
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = heap.iter().map(|s| s.value).sum();
    Ok(QuadResult { value, error: error.max(0.0), segments: heap.len() })
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// Breakpoints at powers of ten between `a > 0` and `b`, always including 1.
pub fn log_panels(a: f64, b: f64) -> Vec<f64> {
    assert!(a > 0.0 && b > a);
    let mut pts = vec![a];
    let mut k = a.log10().floor() as i32 + 1;
    loop {
        let p = 10f64.powi(k);
        if p >= b {
            break;
        }
        pts.push(p);
        k += 1;
    }
    pts.push(b);
    pts
}

/// Integral over `[a, b]` on log-spaced panels split at `u = 1`.
pub fn integrate_log_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    integrate_breaks(f, &log_panels(a, b), abs_tol, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(r.value, 64.0 / 6.0 - 4.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate_log_panels(|x| x.powf(-0.5), 1e-12, 1.0, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(r.value, 2.0 - 2e-6, max_relative = 1e-10);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_log_panels(|x| (-x).exp(), 1e-8, 800.0, 1e-14, 1e-13).unwrap();
        assert_relative_eq!(r.value, (-1e-8f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn panels_contain_one() {
        let p = log_panels(0.003, 250.0);
        assert_eq!(p, vec![0.003, 0.01, 0.1, 1.0, 10.0, 100.0, 250.0]);
    }

    #[test]
    fn divergence_is_reported() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10, 1e-10);
        assert!(r.is_err(), "{r:?}");
    }
}
