use std::collections::BTreeMap;

use super::levy::{tail_integral, LevyMeasure};
use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiClosed {
    /// `d·q^{1+α}`
    Stable { d: f64, alpha: f64 },
    /// `b·q + σ²q²/2`, which covers the linear and Feller families
    Quadratic,
}

#[derive(Debug, Clone)]
pub struct BranchingMechanism {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub b: f64,
    pub sigma2: f64,
    pub pi: LevyMeasure,
    pub closed: Option<PsiClosed>,
}

impl BranchingMechanism {
    pub fn from_measure(name: &str, b: f64, sigma2: f64, pi: LevyMeasure) -> Result<Self> {
        if sigma2 < 0.0 {
            return Err(Error::InvalidParameter(format!("σ² = {sigma2} < 0")));
        }
        pi.check_branching()?;
        Ok(BranchingMechanism { name: name.into(), params: BTreeMap::new(), b, sigma2, pi, closed: None })
    }

    pub fn is_zero(&self) -> bool {
        self.b == 0.0 && self.sigma2 == 0.0 && matches!(self.pi, LevyMeasure::Zero)
    }

    pub fn psi(&self, q: f64) -> Result<f64> {
        if q < 0.0 {
            return Err(Error::Domain(format!("Ψ evaluated at q = {q} < 0")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        match self.closed {
            Some(PsiClosed::Stable { d, alpha }) => Ok(d * q.powf(1.0 + alpha)),
            Some(PsiClosed::Quadratic) => Ok(self.b * q + 0.5 * self.sigma2 * q * q),
            None => self.psi_levy(q),
        }
    }

    /// `bq + σ²q²/2 + q∫₀^∞ (1 − e^{-qu}) π̄(u) du`.
    pub fn psi_levy(&self, q: f64) -> Result<f64> {
        if q == 0.0 {
            return Ok(0.0);
        }
        let base = self.b * q + 0.5 * self.sigma2 * q * q;
        let jump = match &self.pi {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::Exponential { mass, rate } => mass * q / (rate * (rate + q)),
            LevyMeasure::Power { coeff, index } => {
                // tail index 1 + α gives C Γ(1−α) / α · q^α
                let alpha = index - 1.0;
                coeff * statrs::function::gamma::gamma(1.0 - alpha) / alpha * q.powf(alpha)
            }
            pi => {
                let a = (1e-8 / q).min(1e-8);
                let upper = 60.0 / q;
                // (1 − e^{-qu}) ≈ qu on the head
                let head = q * quadrature::integrate_log_panels(|u| u * pi.tail(u), 1e-200, a, 1e-300, 1e-8)?.value;
                let body = quadrature::integrate_log_panels(
                    |u| -(-q * u).exp_m1() * pi.tail(u),
                    a,
                    upper,
                    1e-300,
                    1e-11,
                )?;
                head + body.value + tail_integral(pi, upper)?
            }
        };
        Ok(base + q * jump)
    }

    /// Closed-form `(Ψ', Ψ'')`.
    pub fn psi_derivatives(&self, q: f64) -> Option<(f64, f64)> {
        match self.closed? {
            PsiClosed::Stable { d, alpha } => {
                Some((d * (1.0 + alpha) * q.powf(alpha), d * (1.0 + alpha) * alpha * q.powf(alpha - 1.0)))
            }
            PsiClosed::Quadratic => Some((self.b + self.sigma2 * q, self.sigma2)),
        }
    }

    /// Cutoff `C` with `∫_C^∞ u π(du) ≤ 10⁻³ ∫ (u ∧ u²) π(du)`.
    pub fn jump_cutoff(&self) -> Result<f64> {
        if matches!(self.pi, LevyMeasure::Zero) {
            return Ok(f64::INFINITY);
        }
        let big = |c: f64| -> Result<f64> { Ok(c * self.pi.tail(c) + tail_integral(&self.pi, c)?) };
        let small = quadrature::integrate_log_panels(|u| 2.0 * u * self.pi.tail(u), 1e-200, 1.0, 1e-300, 1e-8)?.value
            - self.pi.tail(1.0);
        let total = small.max(0.0) + big(1.0)?;
        let mut c = 1.0;
        while big(c)? > 1e-3 * total {
            c *= 2.0;
            if c > 1e300 {
                return Err(Error::Integrability("no cutoff found for π".into()));
            }
        }
        Ok(c)
    }
}
