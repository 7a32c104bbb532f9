use std::collections::BTreeMap;

use serde::Serialize;

use super::levy::{LevyMeasure, SlowShape};
use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::quadrature;

/// Regime of `x ↦ xΦ(e^{-x})` as `x → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Regime {
    Log,
    SuperLog,
    SubLog,
    NotSlowlyVarying { index: f64 },
}

impl Regime {
    pub fn label(&self) -> String {
        match self {
            Regime::Log => "Log".into(),
            Regime::SuperLog => "Super-log".into(),
            Regime::SubLog => "Sub-log (no convergence)".into(),
            Regime::NotSlowlyVarying { index } => format!("not slowly varying (index {index})"),
        }
    }

    pub fn is_slowly_varying(&self) -> bool {
        !matches!(self, Regime::NotSlowlyVarying { .. })
    }

    /// Log and Super-log regimes, where an extremal limit is expected.
    pub fn has_extremal_limit(&self) -> bool {
        matches!(self, Regime::Log | Regime::SuperLog)
    }
}

/// Analytic Laplace exponent attached to a preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiClosed {
    /// `d·q^β`
    Stable { d: f64, beta: f64 },
    /// `mass·q/(rate + q)`
    Exponential { mass: f64, rate: f64 },
    /// `1 / h(ln(1 + 1/q))`, equivalent to the true exponent at 0 only
    Slow(SlowShape),
}

#[derive(Debug, Clone)]
pub struct ImmigrationMechanism {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub beta: f64,
    pub nu: LevyMeasure,
    pub closed: Option<PhiClosed>,
    pub log_moment: bool,
    pub regime: Regime,
    /// Regular-variation index of Φ at 0.
    pub rv_index: f64,
    /// `lim xΦ(e^{-x})` in the Log regime.
    pub log_limit: Option<f64>,
}

impl ImmigrationMechanism {
    /// Mechanism with no closed form; Φ is evaluated by quadrature.
    pub fn from_measure(name: &str, beta: f64, nu: LevyMeasure) -> Result<Self> {
        if beta < 0.0 {
            return Err(Error::InvalidParameter(format!("immigration drift {beta} < 0")));
        }
        nu.check_immigration()?;
        Ok(ImmigrationMechanism {
            name: name.to_string(),
            params: BTreeMap::new(),
            beta,
            nu,
            closed: None,
            log_moment: true,
            regime: Regime::NotSlowlyVarying { index: 1.0 },
            rv_index: 1.0,
            log_limit: None,
        })
    }

    /// Whether the closed form equals the Lévy–Khintchine exponent exactly.
    pub fn closed_is_exact(&self) -> bool {
        matches!(self.closed, Some(PhiClosed::Stable { .. }) | Some(PhiClosed::Exponential { .. }))
    }

    pub fn slow_shape(&self) -> Option<SlowShape> {
        match self.closed {
            Some(PhiClosed::Slow(s)) => Some(s),
            _ => None,
        }
    }

    fn a_clamp(&self) -> f64 {
        self.slow_shape().map(|s| s.a_min()).unwrap_or(0.0)
    }

    /// Φ(q): the closed form when available, otherwise the Lévy–Khintchine quadrature.
    pub fn phi(&self, q: f64) -> Result<f64> {
        if q < 0.0 {
            return Err(Error::Domain(format!("Φ evaluated at q = {q} < 0")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        match self.closed {
            Some(PhiClosed::Stable { d, beta }) => Ok(d * q.powf(beta)),
            Some(PhiClosed::Exponential { mass, rate }) => Ok(self.beta * q + mass * q / (rate + q)),
            Some(PhiClosed::Slow(s)) => Ok(1.0 / s.h((1.0 / q).ln_1p().max(self.a_clamp()))),
            None => self.phi_levy(q),
        }
    }

    /// `βq + q∫₀^∞ e^{-qu} ν̄(u) du`.
    pub fn phi_levy(&self, q: f64) -> Result<f64> {
        if q < 0.0 {
            return Err(Error::Domain(format!("Φ evaluated at q = {q} < 0")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        let jump = match &self.nu {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Exponential { mass, rate } => mass * q / (rate + q),
            LevyMeasure::Power { coeff, index } => coeff * statrs::function::gamma::gamma(1.0 - index) * q.powf(*index),
            nu => laplace_tail_integral(nu, q)?,
        };
        Ok(self.beta * q + jump)
    }

    /// Closed-form `(Φ', Φ'')`.
    pub fn phi_derivatives(&self, q: f64) -> Option<(f64, f64)> {
        match self.closed? {
            PhiClosed::Stable { d, beta } => {
                Some((d * beta * q.powf(beta - 1.0), d * beta * (beta - 1.0) * q.powf(beta - 2.0)))
            }
            PhiClosed::Exponential { mass, rate } => {
                let r = rate + q;
                Some((self.beta + mass * rate / (r * r), -2.0 * mass * rate / (r * r * r)))
            }
            PhiClosed::Slow(s) => {
                let l = (1.0 / q).ln_1p();
                if l < self.a_clamp() {
                    return Some((0.0, 0.0));
                }
                let h = s.h(l);
                let r = 1.0 / (q * (1.0 + q));
                let dr = -(1.0 + 2.0 * q) * r * r;
                let h1 = s.h1(l);
                let d1 = h1 * r / (h * h);
                let d2 = -s.h2(l) * r * r / (h * h) + h1 * dr / (h * h) + 2.0 * h1 * h1 * r * r / (h * h * h);
                Some((d1, d2))
            }
        }
    }

    /// `Φ(e^{-x})` without underflow, from the closed form.
    pub fn phi_exp_neg(&self, x: f64) -> Result<f64> {
        match self.closed {
            Some(PhiClosed::Slow(s)) => {
                // ln(1 + e^x)
                let l = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
                Ok(1.0 / s.h(l.max(self.a_clamp())))
            }
            Some(PhiClosed::Stable { d, beta }) => Ok(d * (-beta * x).exp()),
            _ => self.phi((-x).exp()),
        }
    }

    /// Supremum of Φ on `[0, ∞)`.
    pub fn phi_sup(&self) -> f64 {
        if self.beta > 0.0 {
            return f64::INFINITY;
        }
        match self.closed {
            Some(PhiClosed::Exponential { mass, .. }) => mass,
            Some(PhiClosed::Slow(s)) => {
                let a = self.a_clamp();
                if a > 0.0 { 1.0 / s.h(a) } else { f64::INFINITY }
            }
            Some(PhiClosed::Stable { .. }) => f64::INFINITY,
            None => self.nu.total_mass(),
        }
    }

    /// `Φ⁻¹(y)` by bracketing on a logarithmic scale followed by bisection.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(Error::Domain(format!("Φ⁻¹ evaluated at {y} < 0")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        while self.phi(lo)? > y {
            lo *= 0.5;
            if lo < 1e-300 {
                return Ok(0.0);
            }
        }
        while self.phi(hi)? < y {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Range { value: y, sup: self.phi(1e300)? });
            }
        }
        for _ in 0..400 {
            let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            let v = self.phi(mid)?;
            if (v - y).abs() <= 1e-13 * y {
                return Ok(mid);
            }
            if v < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        let (flo, fhi) = (self.phi(lo)?, self.phi(hi)?);
        Ok(if (flo - y).abs() < (fhi - y).abs() { lo } else { hi })
    }

    /// `t·g(y) = 1/F(1/y)` for the closed-form `F`; zero at `y = 0`.
    pub fn g_scaled(&self, y: Magnitude) -> Result<f64> {
        if y.is_zero() {
            return Ok(0.0);
        }
        match self.closed {
            Some(PhiClosed::Slow(s)) => Ok(match s {
                SlowShape::IterLog => y.ll(),
                _ => s.h(y.ln1p().max(self.a_clamp())),
            }),
            Some(PhiClosed::Stable { d, beta }) => Ok((beta * y.ln()).exp() / d),
            _ => Ok(1.0 / self.phi(1.0 / y.value())?),
        }
    }

    /// Inverse of [`g_scaled`](Self::g_scaled).
    pub fn g_scaled_inverse(&self, z: f64) -> Result<Magnitude> {
        if z <= 0.0 {
            return Ok(Magnitude::ZERO);
        }
        match self.closed {
            Some(PhiClosed::Slow(s)) => Ok(s.h_inverse_mag(z)),
            Some(PhiClosed::Stable { d, beta }) => Ok(Magnitude::from_ln((d * z).ln() / beta)),
            _ => {
                let w = self.phi_inverse(1.0 / z)?;
                Ok(Magnitude::from_ln(-w.ln()))
            }
        }
    }

    /// `(y·G'(y), y²·G''(y))` for `G = t·g`.
    pub fn g_scaled_derivatives(&self, y: Magnitude) -> Result<(f64, f64)> {
        if let Some(PhiClosed::Slow(s)) = self.closed {
            let a = y.ln1p();
            if a < self.a_clamp() {
                return Ok((0.0, 0.0));
            }
            // y/(1+y) = 1 − e^{-A}
            let ratio = -(-a).exp_m1();
            return Ok((s.h1(a) * ratio, (s.h2(a) - s.h1(a)) * ratio * ratio));
        }
        let w = 1.0 / y.value();
        let f = self.phi(w)?;
        let (f1, f2) = self
            .phi_derivatives(w)
            .ok_or_else(|| Error::Capability(format!("{} has no closed-form derivatives", self.name)))?;
        let d1 = f1 * w / (f * f);
        let d2 = -f2 * w * w / (f * f) - 2.0 * f1 * w / (f * f) + 2.0 * f1 * f1 * w * w / (f * f * f);
        Ok((d1, d2))
    }
}

/// `q∫₀^∞ e^{-qu} m̄(u) du` on log panels, with the head `[0, a]` taken from
/// the integrated tail.
fn laplace_tail_integral(nu: &LevyMeasure, q: f64) -> Result<f64> {
    let a = (1e-12 / q).min(1e-6);
    let upper = 60.0 / q;
    let mut breaks = quadrature::log_panels(a, upper.max(a * 10.0));
    if let LevyMeasure::Slow { floor, .. } = nu {
        if *floor > a && *floor < upper {
            breaks.push(*floor);
            breaks.sort_by(f64::total_cmp);
        }
    }
    let head = nu.integrated_tail(a)?;
    if !head.is_finite() {
        return Err(Error::Integrability("∫₀¹ u ν(du) diverges".into()));
    }
    let body = quadrature::integrate_breaks(|u| (-q * u).exp() * nu.tail(u), &breaks, 1e-300, 1e-12)?;
    Ok(q * (head + body.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log_preset(c: f64) -> ImmigrationMechanism {
        let mut m = ImmigrationMechanism::from_measure(
            "log",
            0.0,
            LevyMeasure::Slow { shape: SlowShape::Log { c }, floor: 0.01 },
        )
        .unwrap();
        m.closed = Some(PhiClosed::Slow(SlowShape::Log { c }));
        m
    }

    #[test]
    fn slow_derivatives_match_differences() {
        let m = log_preset(1.5);
        for &q in &[1e-6, 1e-3, 0.2, 3.0] {
            let e = 1e-5 * q;
            let (d1, d2) = m.phi_derivatives(q).unwrap();
            let fd1 = (m.phi(q + e).unwrap() - m.phi(q - e).unwrap()) / (2.0 * e);
            let fd2 = (m.phi_derivatives(q + e).unwrap().0 - m.phi_derivatives(q - e).unwrap().0) / (2.0 * e);
            assert_relative_eq!(d1, fd1, max_relative = 1e-6);
            assert_relative_eq!(d2, fd2, max_relative = 1e-5);
        }
    }

    #[test]
    fn g_derivatives_agree_between_forms() {
        // the generic F-based formulas against the h-based ones
        let m = log_preset(2.0);
        let mut generic = m.clone();
        generic.closed = None;
        for &y in &[0.5, 4.0, 300.0] {
            let (a1, a2) = m.g_scaled_derivatives(Magnitude::from_f64(y)).unwrap();
            let w = 1.0 / y;
            let f = m.phi(w).unwrap();
            let (f1, f2) = m.phi_derivatives(w).unwrap();
            let b1 = f1 * w / (f * f);
            let b2 = -f2 * w * w / (f * f) - 2.0 * f1 * w / (f * f) + 2.0 * f1 * f1 * w * w / (f * f * f);
            assert_relative_eq!(a1, b1, max_relative = 1e-9);
            assert_relative_eq!(a2, b2, max_relative = 1e-7, epsilon = 1e-12);
        }
    }

    #[test]
    fn g_second_derivative_by_differences() {
        let m = log_preset(1.0);
        for &y in &[0.3, 2.0, 50.0] {
            let e = 1e-4 * y;
            let g = |v: f64| m.g_scaled(Magnitude::from_f64(v)).unwrap();
            let fd2 = (g(y + e) - 2.0 * g(y) + g(y - e)) / (e * e);
            let (_, d2) = m.g_scaled_derivatives(Magnitude::from_f64(y)).unwrap();
            assert_relative_eq!(d2 / (y * y), fd2, max_relative = 1e-5);
        }
    }

    #[test]
    fn inverse_of_slow_closed_form() {
        let m = log_preset(1.0);
        let q = m.phi_inverse(0.5).unwrap();
        assert_relative_eq!(q, 1.0 / (std::f64::consts::E.powi(2) - 1.0), max_relative = 1e-10);
    }

    #[test]
    fn levy_quadrature_exponential_tail() {
        let mut m = ImmigrationMechanism::from_measure(
            "exp-custom",
            0.0,
            LevyMeasure::custom("e^-u", |u: f64| (-u).exp()),
        )
        .unwrap();
        m.closed = None;
        for &q in &[1e-4, 0.5, 1.0, 20.0] {
            assert_relative_eq!(m.phi(q).unwrap(), q / (1.0 + q), max_relative = 1e-9);
        }
    }
}
