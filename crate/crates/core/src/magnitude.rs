//! Nonnegative reals stored as `ln(1 + ln(1 + y))`.
//!
//! Slowly varying immigration produces jumps whose logarithm already overflows
//! `f64`. Keeping the doubly logarithmic coordinate lets paths carry those
//! values through sums, decays and renormalisation without saturating.

use std::cmp::Ordering;

/// Below this `ln(1+y)` level, arithmetic is done on `y` itself.
const LINEAR_ZONE: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Magnitude {
    ll: f64,
}

impl Magnitude {
    pub const ZERO: Magnitude = Magnitude { ll: 0.0 };

    pub fn from_f64(y: f64) -> Self {
        debug_assert!(y >= 0.0);
        Magnitude { ll: y.max(0.0).ln_1p().ln_1p() }
    }

    /// From `A = ln(1 + y)`.
    pub fn from_ln1p(a: f64) -> Self {
        Magnitude { ll: a.max(0.0).ln_1p() }
    }

    /// From `ln(1 + ln(1 + y))`.
    pub fn from_ll(ll: f64) -> Self {
        Magnitude { ll: ll.max(0.0) }
    }

    /// From `L = ln y`, for `y > 0` possibly beyond `f64`.
    pub fn from_ln(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        // ln(1 + e^L), evaluated without overflow
        let a = if l > 0.0 { l + (-l).exp().ln_1p() } else { l.exp().ln_1p() };
        Self::from_ln1p(a)
    }

    pub fn ll(self) -> f64 {
        self.ll
    }

    /// `ln(1 + y)`; infinite once `y` leaves double-exponential range.
    pub fn ln1p(self) -> f64 {
        self.ll.exp_m1()
    }

    pub fn value(self) -> f64 {
        self.ll.exp_m1().exp_m1()
    }

    /// `ln y`; `-inf` at zero.
    pub fn ln(self) -> f64 {
        let a = self.ln1p();
        if a > LINEAR_ZONE {
            a + (-(-a).exp()).ln_1p()
        } else {
            a.exp_m1().ln()
        }
    }

    pub fn is_zero(self) -> bool {
        self.ll == 0.0
    }

    /// `max(self - other, 0)`.
    pub fn saturating_sub(self, other: Magnitude) -> Magnitude {
        if other.ll >= self.ll {
            return Self::ZERO;
        }
        let a = self.ln1p();
        let b = other.ln1p();
        if !a.is_finite() {
            return self;
        }
        if a <= LINEAR_ZONE {
            return Magnitude::from_f64((a.exp_m1() - b.exp_m1()).max(0.0));
        }
        // 1 + y_a - y_b = e^A (1 - e^{B-A} + e^{-A})
        let drop = (-(b - a).exp_m1() + (-a).exp()).ln();
        Magnitude::from_ln1p(a + drop)
    }

    /// `y · e^{k}`.
    pub fn scale_exp(self, k: f64) -> Magnitude {
        if self.is_zero() {
            return self;
        }
        let a = self.ln1p();
        if a <= LINEAR_ZONE || a + k <= LINEAR_ZONE {
            return Magnitude::from_ln(self.ln() + k);
        }
        // 1 + y e^k = e^{A+k}(1 − e^{-A} + e^{-A-k}), shifted in the ln(1 + A) coordinate
        let shift = k + ((-a - k).exp() - (-a).exp()).ln_1p();
        Magnitude::from_ll(self.ll + (shift * (-self.ll).exp()).ln_1p())
    }

    pub fn max(self, other: Magnitude) -> Magnitude {
        if self.ll >= other.ll { self } else { other }
    }
}

impl std::ops::Add for Magnitude {
    type Output = Magnitude;

    fn add(self, other: Magnitude) -> Magnitude {
        let (hi, lo) = if self.ll >= other.ll { (self, other) } else { (other, self) };
        if lo.is_zero() {
            return hi;
        }
        let a = hi.ln1p();
        let b = lo.ln1p();
        if !a.is_finite() {
            return hi;
        }
        if a <= LINEAR_ZONE {
            return Magnitude::from_f64(a.exp_m1() + b.exp_m1());
        }
        // 1 + y_a + y_b = e^A (1 + e^{B-A} - e^{-A})
        let bump = ((b - a).exp() - (-a).exp()).ln_1p();
        Magnitude::from_ln1p(a + bump)
    }
}

impl PartialOrd for Magnitude {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ll.partial_cmp(&other.ll)
    }
}

impl From<f64> for Magnitude {
    fn from(y: f64) -> Self {
        Magnitude::from_f64(y)
    }
}

impl std::iter::Sum for Magnitude {
    fn sum<I: Iterator<Item = Magnitude>>(iter: I) -> Self {
        iter.fold(Magnitude::ZERO, |a, b| a + b)
    }
}
