use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::quadrature;

/// Slowly varying tails written through `A = ln(1 + u)` as `m̄(u) = 1 / h(A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlowShape {
    /// `h(A) = A / c`
    Log { c: f64 },
    /// `h(A) = ln(1 + A)`
    IterLog,
    /// `h(A) = A^δ / ln(1 + A)`
    SuperLogDelta { delta: f64 },
    /// `h(A) = A²`
    SubLog,
}

impl SlowShape {
    pub fn h(&self, a: f64) -> f64 {
        match *self {
            SlowShape::Log { c } => a / c,
            SlowShape::IterLog => a.ln_1p(),
            SlowShape::SuperLogDelta { delta } => {
                if a == 0.0 {
                    return if delta < 1.0 { f64::INFINITY } else { 1.0 };
                }
                a.powf(delta) / a.ln_1p()
            }
            SlowShape::SubLog => a * a,
        }
    }

    pub fn h1(&self, a: f64) -> f64 {
        match *self {
            SlowShape::Log { c } => 1.0 / c,
            SlowShape::IterLog => 1.0 / (1.0 + a),
            SlowShape::SuperLogDelta { delta } => self.h(a) * superlog_k(delta, a),
            SlowShape::SubLog => 2.0 * a,
        }
    }

    pub fn h2(&self, a: f64) -> f64 {
        match *self {
            SlowShape::Log { .. } => 0.0,
            SlowShape::IterLog => -1.0 / ((1.0 + a) * (1.0 + a)),
            SlowShape::SuperLogDelta { delta } => {
                let k = superlog_k(delta, a);
                let l = a.ln_1p();
                let dk = -delta / (a * a) + (1.0 + l) / (l * l * (1.0 + a) * (1.0 + a));
                self.h(a) * (k * k + dk)
            }
            SlowShape::SubLog => 2.0,
        }
    }

    /// `h` evaluated at `A = ln(1 + y)` for a possibly astronomical `y`.
    pub fn h_mag(&self, y: Magnitude) -> f64 {
        match self {
            SlowShape::IterLog => y.ll(),
            _ => self.h(y.ln1p()),
        }
    }

    /// Smallest `A` from which `h` is increasing.
    pub fn a_min(&self) -> f64 {
        match *self {
            SlowShape::SuperLogDelta { delta } if delta < 1.0 => {
                // root of δ(1 + A) ln(1 + A) = A
                let f = |a: f64| delta * (1.0 + a) * a.ln_1p() - a;
                let (mut lo, mut hi) = (1e-12, 1.0);
                while f(hi) < 0.0 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
            _ => 0.0,
        }
    }

    /// Solves `h(A) = level` on the increasing branch, as a magnitude `ln(1+u) = A`.
    pub fn h_inverse_mag(&self, level: f64) -> Magnitude {
        match *self {
            SlowShape::Log { c } => Magnitude::from_ln1p(c * level),
            SlowShape::IterLog => Magnitude::from_ll(level),
            SlowShape::SubLog => Magnitude::from_ln1p(level.sqrt()),
            SlowShape::SuperLogDelta { .. } => {
                let a0 = self.a_min();
                if level <= self.h(a0.max(f64::MIN_POSITIVE)) {
                    return Magnitude::from_ln1p(a0);
                }
                // bisection on ln A
                let mut lo = a0.max(1e-300).ln();
                let mut hi = 1.0f64.max(lo + 1.0);
                while self.h(hi.exp()) < level {
                    hi *= 2.0;
                    if hi > 700.0 {
                        return Magnitude::from_ll(f64::INFINITY);
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.h(mid.exp()) < level {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 * hi.abs().max(1.0) {
                        break;
                    }
                }
                Magnitude::from_ln1p(hi.exp())
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            SlowShape::Log { c } => format!("c/ln(1+u), c={c}"),
            SlowShape::IterLog => "1/ln(1+ln(1+u))".to_string(),
            SlowShape::SuperLogDelta { delta } => format!("ln(1+ln(1+u))/ln(1+u)^{delta}"),
            SlowShape::SubLog => "1/ln(1+u)^2".to_string(),
        }
    }
}

fn superlog_k(delta: f64, a: f64) -> f64 {
    delta / a - 1.0 / (a.ln_1p() * (1.0 + a))
}

pub type TailFn = dyn Fn(f64) -> f64 + Send + Sync;

/// User-supplied tail; the inverse is obtained by bisection.
#[derive(Clone)]
pub struct CustomTail {
    pub label: String,
    pub tail: Arc<TailFn>,
}

impl fmt::Debug for CustomTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomTail({})", self.label)
    }
}

/// A Lévy measure on `(0, ∞)` described by its tail `m̄(u) = m([u, ∞))`.
#[derive(Debug, Clone)]
pub enum LevyMeasure {
    Zero,
    /// `m̄(u) = mass · e^{-rate·u}`
    Exponential { mass: f64, rate: f64 },
    /// `m̄(u) = coeff · u^{-index}`
    Power { coeff: f64, index: f64 },
    /// `m̄(u) = 1 / h(ln(1 + max(u, floor)))`
    Slow { shape: SlowShape, floor: f64 },
    Custom(CustomTail),
}

impl LevyMeasure {
    pub fn custom<F>(label: &str, tail: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        LevyMeasure::Custom(CustomTail { label: label.to_string(), tail: Arc::new(tail) })
    }

    pub fn tail(&self, u: f64) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Exponential { mass, rate } => mass * (-rate * u).exp(),
            LevyMeasure::Power { coeff, index } => coeff * u.powf(-index),
            LevyMeasure::Slow { shape, floor } => 1.0 / shape.h(u.max(*floor).ln_1p()),
            LevyMeasure::Custom(c) => (c.tail)(u),
        }
    }

    pub fn tail_mag(&self, u: Magnitude) -> f64 {
        match self {
            LevyMeasure::Slow { shape, floor } => {
                if u.value() <= *floor {
                    self.tail(*floor)
                } else {
                    1.0 / shape.h_mag(u)
                }
            }
            _ => self.tail(u.value()),
        }
    }

    /// `m̄(0+)`, infinite for infinite-activity measures.
    pub fn total_mass(&self) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Exponential { mass, .. } => *mass,
            LevyMeasure::Power { .. } => f64::INFINITY,
            LevyMeasure::Slow { floor, .. } => self.tail(floor.max(0.0)),
            LevyMeasure::Custom(c) => (c.tail)(1e-300),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total_mass().is_finite()
    }

    /// Generalised inverse `inf{u > 0 : m̄(u) < p}`.
    pub fn inverse_tail(&self, p: f64) -> f64 {
        self.inverse_tail_mag(p).value()
    }

    pub fn inverse_tail_mag(&self, p: f64) -> Magnitude {
        debug_assert!(p > 0.0);
        match self {
            LevyMeasure::Zero => Magnitude::ZERO,
            LevyMeasure::Exponential { mass, rate } => {
                if p >= *mass {
                    Magnitude::ZERO
                } else {
                    Magnitude::from_f64((mass / p).ln() / rate)
                }
            }
            LevyMeasure::Power { coeff, index } => Magnitude::from_ln(((coeff / p).ln()) / index),
            LevyMeasure::Slow { shape, floor } => {
                if p >= self.tail(*floor) {
                    return Magnitude::ZERO;
                }
                shape.h_inverse_mag(1.0 / p).max(Magnitude::from_f64(*floor))
            }
            LevyMeasure::Custom(c) => Magnitude::from_f64(bisect_inverse(&*c.tail, p)),
        }
    }

    pub fn density(&self, u: f64) -> Option<f64> {
        match self {
            LevyMeasure::Zero => Some(0.0),
            LevyMeasure::Exponential { mass, rate } => Some(mass * rate * (-rate * u).exp()),
            LevyMeasure::Power { coeff, index } => Some(coeff * index * u.powf(-index - 1.0)),
            LevyMeasure::Slow { shape, floor } => {
                if u < *floor {
                    return Some(0.0);
                }
                let a = u.ln_1p();
                let h = shape.h(a);
                Some(shape.h1(a) / (h * h * (1.0 + u)))
            }
            LevyMeasure::Custom(_) => None,
        }
    }

    /// Mass of `[eps, ∞)`.
    pub fn truncated_mass(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return self.total_mass();
        }
        self.tail(eps)
    }

    /// `∫₀^a m̄(u) du`.
    pub fn integrated_tail(&self, a: f64) -> Result<f64> {
        if a <= 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Exponential { mass, rate } => mass * (-(-rate * a).exp_m1()) / rate,
            LevyMeasure::Power { coeff, index } => {
                if *index >= 1.0 {
                    return Ok(f64::INFINITY);
                }
                coeff * a.powf(1.0 - index) / (1.0 - index)
            }
            LevyMeasure::Slow { floor, .. } => {
                let f = *floor;
                if a <= f {
                    a * self.tail(f)
                } else {
                    let lo = if f > 0.0 { f } else { 1e-300 };
                    let head = lo * self.tail(lo);
                    let body = quadrature::integrate_log_panels(|u| self.tail(u), lo, a, 1e-300, 1e-12)?;
                    head + body.value
                }
            }
            LevyMeasure::Custom(_) => near_zero_integral(|u| self.tail(u), a, "∫₀¹ u m(du)")?,
        })
    }

    /// `∫₀^ε u m(du) = ∫₀^ε m̄(u) du − ε m̄(ε)`.
    pub fn truncated_mean(&self, eps: f64) -> Result<f64> {
        if eps <= 0.0 {
            return Ok(0.0);
        }
        let m = match self {
            LevyMeasure::Power { coeff, index } if *index < 1.0 => {
                coeff * eps.powf(1.0 - index) * index / (1.0 - index)
            }
            _ => self.integrated_tail(eps)? - eps * self.tail(eps),
        };
        if !m.is_finite() {
            return Err(Error::Integrability(format!("∫₀^{eps} u m(du) diverges")));
        }
        Ok(m.max(0.0))
    }

    pub fn label(&self) -> String {
        match self {
            LevyMeasure::Zero => "0".to_string(),
            LevyMeasure::Exponential { mass, rate } => format!("{mass}·exp(-{rate}u)"),
            LevyMeasure::Power { coeff, index } => format!("{coeff}·u^-{index}"),
            LevyMeasure::Slow { shape, floor } => format!("{} (floor {floor})", shape.label()),
            LevyMeasure::Custom(c) => c.label.clone(),
        }
    }

    /// Checks `∫ (1 ∧ u) m(du) < ∞`.
    pub fn check_immigration(&self) -> Result<()> {
        let near = self.integrated_tail(1.0)?;
        if !near.is_finite() {
            return Err(Error::Integrability("∫₀¹ u m(du) diverges".into()));
        }
        Ok(())
    }

    /// Checks `∫ (u ∧ u²) m(du) < ∞`.
    pub fn check_branching(&self) -> Result<()> {
        // ∫₀¹ u² m(du) ≤ 2∫₀¹ u m̄(u) du  and  ∫₁^∞ u m(du) = m̄(1) + ∫₁^∞ m̄
        let near = match self {
            LevyMeasure::Power { index, .. } if *index >= 2.0 => f64::INFINITY,
            LevyMeasure::Power { coeff, index } => coeff / (2.0 - index),
            _ => near_zero_integral(|u| u * self.tail(u), 1.0, "∫₀¹ u² m(du)")?,
        };
        if !near.is_finite() {
            return Err(Error::Integrability("∫₀¹ u² m(du) diverges".into()));
        }
        tail_integral(self, 1.0).map(|_| ())
    }
}

/// `∫_a^∞ m̄(u) du` by growing decades until the contribution is negligible.
pub fn tail_integral(m: &LevyMeasure, a: f64) -> Result<f64> {
    match m {
        LevyMeasure::Zero => return Ok(0.0),
        LevyMeasure::Exponential { mass, rate } => return Ok(mass * (-rate * a).exp() / rate),
        LevyMeasure::Power { coeff, index } => {
            if *index <= 1.0 {
                return Err(Error::Integrability("∫₁^∞ u m(du) diverges".into()));
            }
            return Ok(coeff * a.powf(1.0 - index) / (index - 1.0));
        }
        _ => {}
    }
    let mut total = 0.0;
    let mut lo = a;
    let mut last = f64::INFINITY;
    while lo < 1e300 {
        let hi = lo * 10.0;
        let piece = quadrature::integrate(|u| m.tail(u), lo, hi, 1e-300, 1e-10)?.value;
        total += piece;
        if piece <= 1e-14 * total && piece < last {
            return Ok(total);
        }
        last = piece;
        lo = hi;
    }
    Err(Error::Integrability("∫₁^∞ u m(du) diverges".into()))
}

/// `∫₀^a f` on log panels down to 1e-200; a non-negligible contribution from
/// the innermost hundred decades is read as divergence.
fn near_zero_integral<F: Fn(f64) -> f64>(f: F, a: f64, what: &str) -> Result<f64> {
    let body = quadrature::integrate_log_panels(&f, 1e-100, a, 1e-300, 1e-11)?.value;
    let inner = quadrature::integrate_log_panels(&f, 1e-200, 1e-100, 1e-300, 1e-6)
        .map(|r| r.value)
        .unwrap_or(f64::INFINITY);
    if !(inner <= 1e-8 * body.abs().max(1e-300)) {
        return Err(Error::Integrability(format!("{what} diverges")));
    }
    Ok(body + inner)
}

fn bisect_inverse(tail: &TailFn, p: f64) -> f64 {
    if tail(1e-300) < p {
        return 0.0;
    }
    let (mut lo, mut hi) = (-690.0f64, 690.0f64);
    if tail(hi.exp()) >= p {
        return f64::INFINITY;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid.exp()) >= p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi.exp()
}
