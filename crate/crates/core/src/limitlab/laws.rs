//! Exact limit laws: extremal-process f.d.d. and ESN marginals.

use crate::error::{Error, Result};

/// `P(E_{s₁} ≤ y₁, …, E_{sₙ} ≤ yₙ) = Π F^{sᵢ−sᵢ₋₁}(y'ᵢ)` with `F(y) = e^{-1/y}`
/// and `y'ᵢ = min(yᵢ, …, yₙ)`.
pub fn fdd_extremal_cdf(s_times: &[f64], ys: &[f64]) -> Result<f64> {
    if s_times.is_empty() || s_times.len() != ys.len() {
        return Err(Error::Domain("need as many levels as times".into()));
    }
    if s_times[0] <= 0.0 || s_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("times must be positive and strictly increasing".into()));
    }
    let mut exponent = 0.0;
    let mut running_min = f64::INFINITY;
    for i in (0..ys.len()).rev() {
        running_min = running_min.min(ys[i]);
        if running_min <= 0.0 {
            return Ok(0.0);
        }
        let start = if i == 0 { 0.0 } else { s_times[i - 1] };
        exponent += (s_times[i] - start) / running_min;
    }
    Ok((-exponent).exp())
}

/// `exp(−∫₀^s c/(y + γv) dv)`, the void probability of the ESN with `μ̄(x) = 1/x`.
pub fn esn_marginal_cdf(gamma: f64, s: f64, y: f64, c: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("s = {s} must be positive")));
    }
    if y == f64::INFINITY {
        return Ok(1.0);
    }
    if !(y > 0.0) || y + gamma * s <= 0.0 {
        return Err(Error::Domain(format!("y + γv must stay positive on [0, s]; y = {y}, γ = {gamma}, s = {s}")));
    }
    Ok(if gamma == 0.0 { (-c * s / y).exp() } else { (-(c / gamma) * (gamma * s / y).ln_1p()).exp() })
}

/// [`esn_marginal_cdf`] extended by 0 where the marginal puts no mass.
pub fn esn_marginal_cdf_total(gamma: f64, s: f64, y: f64, c: f64) -> f64 {
    esn_marginal_cdf(gamma, s, y, c).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn fdd_examples() {
        assert_relative_eq!(fdd_extremal_cdf(&[1.0], &[1.0]).unwrap(), (-1.0f64).exp());
        assert_relative_eq!(fdd_extremal_cdf(&[0.5, 3.0], &[2.0, 2.0]).unwrap(), (-1.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(fdd_extremal_cdf(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), (-2.0f64).exp(), max_relative = 1e-15);
        assert!(fdd_extremal_cdf(&[2.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn esn_examples() {
        assert_relative_eq!(esn_marginal_cdf(0.0, 1.0, 1.0, 1.0).unwrap(), (-1.0f64).exp());
        assert_relative_eq!(esn_marginal_cdf(1.0, 1.0, 1.0, 2.0).unwrap(), 0.25, max_relative = 1e-15);
        assert_eq!(esn_marginal_cdf(0.5, 1.0, f64::INFINITY, 1.0).unwrap(), 1.0);
        assert!(esn_marginal_cdf(1.0, 1.0, 1e300, 1.0).unwrap() > 1.0 - 1e-12);
        assert!(esn_marginal_cdf(-0.5, 1.0, 0.4, 1.0).is_err());
    }

    #[test]
    fn void_integral_by_quadrature() {
        for &(g, s, y, c) in &[(0.5, 2.0, 0.3, 1.5), (-0.4, 1.0, 0.7, 2.0)] {
            let q = crate::quadrature::integrate(|v| c / (y + g * v), 0.0, s, 1e-14, 1e-13).unwrap().value;
            assert_relative_eq!(esn_marginal_cdf(g, s, y, c).unwrap(), (-q).exp(), max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn fdd_monotone_in_each_level(y1 in 0.01f64..10.0, y2 in 0.01f64..10.0, bump in 0.0f64..5.0, s1 in 0.1f64..2.0, ds in 0.1f64..2.0) {
            let s = [s1, s1 + ds];
            let base = fdd_extremal_cdf(&s, &[y1, y2]).unwrap();
            prop_assert!(fdd_extremal_cdf(&s, &[y1 + bump, y2]).unwrap() >= base);
            prop_assert!(fdd_extremal_cdf(&s, &[y1, y2 + bump]).unwrap() >= base);
        }

        #[test]
        fn fdd_factorises_for_increasing_levels(y1 in 0.01f64..10.0, dy in 0.0f64..10.0, s1 in 0.1f64..2.0, ds in 0.1f64..2.0) {
            let y2 = y1 + dy;
            let joint = fdd_extremal_cdf(&[s1, s1 + ds], &[y1, y2]).unwrap();
            let product = (-s1 / y1).exp() * (-ds / y2).exp();
            prop_assert!((joint - product).abs() <= 1e-14);
        }

        #[test]
        fn esn_gamma_zero_is_extremal(s in 0.1f64..5.0, y in 0.01f64..50.0, c in 0.2f64..3.0) {
            let a = esn_marginal_cdf(0.0, s, y, c).unwrap();
            let b = fdd_extremal_cdf(&[c * s], &[y]).unwrap();
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }
}
