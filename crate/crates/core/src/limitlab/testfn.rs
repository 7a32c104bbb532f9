use serde::Serialize;

use crate::error::{Error, Result};

/// `offset + amplitude·bump(x)`, where the bump rises on `[a₁, a₂]` and falls
/// on `[a₃, a₄]` along the quintic smoothstep `6u⁵ − 15u⁴ + 10u³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub a: [f64; 4],
    pub amplitude: f64,
    pub offset: f64,
}

impl Default for TestFunction {
    fn default() -> Self {
        TestFunction { a: [0.5, 1.0, 2.0, 3.0], amplitude: 1.0, offset: 0.0 }
    }
}

fn step(u: f64) -> (f64, f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    let s1 = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    let s2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    (s, s1, s2)
}

impl TestFunction {
    pub fn bump(a: [f64; 4]) -> Result<Self> {
        if !(0.0 <= a[0] && a[0] < a[1] && a[1] <= a[2] && a[2] < a[3]) {
            return Err(Error::InvalidParameter(format!("bump needs 0 ≤ a₁ < a₂ ≤ a₃ < a₄, got {a:?}")));
        }
        Ok(TestFunction { a, amplitude: 1.0, offset: 0.0 })
    }

    pub fn constant(k: f64) -> Self {
        TestFunction { amplitude: 0.0, offset: k, ..Default::default() }
    }

    /// `(f, f', f'')` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let [a1, a2, a3, a4] = self.a;
        let (b, b1, b2) = if x <= a1 || x >= a4 {
            (0.0, 0.0, 0.0)
        } else if x < a2 {
            let w = a2 - a1;
            let (s, s1, s2) = step((x - a1) / w);
            (s, s1 / w, s2 / (w * w))
        } else if x <= a3 {
            (1.0, 0.0, 0.0)
        } else {
            let w = a4 - a3;
            let (s, s1, s2) = step((x - a3) / w);
            (1.0 - s, -s1 / w, -s2 / (w * w))
        };
        (self.offset + self.amplitude * b, self.amplitude * b1, self.amplitude * b2)
    }

    pub fn f(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.eval(x).2
    }

    /// Intervals on which `f'` may be nonzero.
    pub fn slopes(&self) -> [(f64, f64); 2] {
        [(self.a[0], self.a[1]), (self.a[2], self.a[3])]
    }

    pub fn is_flat(&self) -> bool {
        self.amplitude == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shape_and_support() {
        let f = TestFunction::default();
        assert_eq!(f.eval(0.2), (0.0, 0.0, 0.0));
        assert_eq!(f.eval(1.5), (1.0, 0.0, 0.0));
        assert_eq!(f.eval(3.5), (0.0, 0.0, 0.0));
        assert_relative_eq!(f.f(0.75), 0.5);
        assert_relative_eq!(f.f(2.5), 0.5);
    }

    #[test]
    fn derivatives_by_differences() {
        let f = TestFunction::bump([0.5, 1.5, 2.5, 3.5]).unwrap();
        for &x in &[0.6, 0.9, 1.2, 2.7, 3.1, 3.45] {
            let e = 1e-5;
            assert_relative_eq!(f.d1(x), (f.f(x + e) - f.f(x - e)) / (2.0 * e), max_relative = 1e-6, epsilon = 1e-8);
            assert_relative_eq!(f.d2(x), (f.d1(x + e) - f.d1(x - e)) / (2.0 * e), max_relative = 1e-6, epsilon = 1e-6);
        }
    }

    #[test]
    fn continuity_at_knots() {
        let f = TestFunction::default();
        for &x in &f.a {
            let (l, r) = (f.eval(x - 1e-12), f.eval(x + 1e-12));
            assert!((l.0 - r.0).abs() < 1e-9 && (l.1 - r.1).abs() < 1e-9 && (l.2 - r.2).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(TestFunction::bump([1.0, 0.5, 2.0, 3.0]).is_err());
    }
}
