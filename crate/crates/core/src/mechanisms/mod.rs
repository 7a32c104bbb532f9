//! Lévy–Khintchine mechanisms Ψ and Φ, their Lévy measures and the preset families.

mod branching;
mod immigration;
mod levy;
pub mod presets;
pub mod rv;

pub use branching::{BranchingMechanism, PsiClosed};
pub use immigration::{ImmigrationMechanism, PhiClosed, Regime};
pub use levy::{tail_integral, CustomTail, LevyMeasure, SlowShape};
pub use presets::{branching_preset, immigration_preset, Params};

use crate::error::Result;

pub fn psi_eval(mech: &BranchingMechanism, q: f64) -> Result<f64> {
    mech.psi(q)
}

pub fn phi_eval(mech: &ImmigrationMechanism, q: f64) -> Result<f64> {
    mech.phi(q)
}

pub fn phi_inverse(mech: &ImmigrationMechanism, y: f64) -> Result<f64> {
    mech.phi_inverse(y)
}

pub fn nu_tail(mech: &ImmigrationMechanism, u: f64) -> f64 {
    mech.nu.tail(u)
}

pub fn nu_tail_inverse(mech: &ImmigrationMechanism, p: f64) -> f64 {
    mech.nu.inverse_tail(p)
}

/// `ν̄(u)/Φ(1/u)` for the closed form and for the Lévy–Khintchine exponent.
pub fn tauberian_ratios(mech: &ImmigrationMechanism, u: f64) -> Result<(f64, f64)> {
    let tail = mech.nu.tail(u);
    Ok((tail / mech.phi(1.0 / u)?, tail / mech.phi_levy(1.0 / u)?))
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn psi_examples() {
        assert_eq!(psi_eval(&stable_branching(1.0, 1.0).unwrap(), 3.0).unwrap(), 9.0);
        assert_eq!(psi_eval(&feller(1.0, 2.0).unwrap(), 2.0).unwrap(), 6.0);
        for m in all_branching_presets() {
            assert_eq!(psi_eval(&m, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn phi_examples() {
        assert_relative_eq!(phi_eval(&stable_immigration(1.0, 0.5).unwrap(), 4.0).unwrap(), 2.0);
        for m in all_immigration_presets() {
            assert_eq!(phi_eval(&m, 0.0).unwrap(), 0.0);
        }
        assert_relative_eq!(phi_inverse(&stable_immigration(1.0, 0.5).unwrap(), 0.1).unwrap(), 0.01, max_relative = 1e-10);
    }

    #[test]
    fn stable_tail_reproduces_power_by_quadrature() {
        let m = stable_immigration(1.0, 0.5).unwrap();
        assert_relative_eq!(m.nu.tail(4.0), 0.5 / std::f64::consts::PI.sqrt(), max_relative = 1e-12);
        let generic = ImmigrationMechanism::from_measure("q", 0.0, LevyMeasure::custom("u^-1/2/Γ(1/2)", |u: f64| {
            u.powf(-0.5) / std::f64::consts::PI.sqrt()
        }))
        .unwrap();
        for &q in &[1e-3, 0.01, 0.1, 1.0] {
            assert_relative_eq!(generic.phi(q).unwrap(), q.sqrt(), max_relative = 1e-4);
        }
    }

    #[test]
    fn log_phi_levy_against_frozen_oracle() {
        // high-precision quadrature of q∫e^{-qu} ν̄(u) du with floor 0.01
        let m = log_immigration(1.0).unwrap();
        assert_relative_eq!(m.phi_levy(1e-6).unwrap(), 0.076_392_802_625_761_16, max_relative = 1e-9);
        assert_relative_eq!(m.phi(1e-6).unwrap(), 1.0 / (1e6f64).ln_1p(), max_relative = 1e-12);
    }

    #[test]
    fn exact_closed_forms_match_quadrature() {
        for m in all_immigration_presets().into_iter().filter(|m| m.closed_is_exact()) {
            for &q in &[1e-4, 0.01, 0.3, 2.0, 50.0] {
                let c = m.phi(q).unwrap();
                let l = m.phi_levy(q).unwrap();
                assert!(((c - l) / c).abs() <= 1e-6, "{} at {q}: {c} vs {l}", m.name);
            }
        }
    }

    #[test]
    fn declared_regimes_match_probe() {
        for m in all_immigration_presets() {
            let (regime, _) = rv::classify(&m).unwrap();
            match (regime, m.regime) {
                (Regime::NotSlowlyVarying { index: a }, Regime::NotSlowlyVarying { index: b }) => {
                    assert!((a - b).abs() <= 0.05, "{}: probe {a}, declared {b}", m.name)
                }
                (a, b) => assert_eq!(a, b, "{}", m.name),
            }
        }
    }

    #[test]
    fn unknown_preset() {
        let err = immigration_preset("nope", &Params::new()).unwrap_err();
        assert!(err.to_string().contains("unknown mechanism preset"));
    }
}
