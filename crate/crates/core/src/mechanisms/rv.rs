//! Regular-variation diagnostics.

use serde::Serialize;

use super::immigration::{ImmigrationMechanism, Regime};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeAt {
    Zero,
    Infinity,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RvEstimate {
    pub index: f64,
    pub dispersion: f64,
    /// `f` at the most extreme probe point.
    pub level: f64,
}

const LAMBDAS: [f64; 3] = [2.0, 4.0, 8.0];

/// Probe points `10^{10}, 10^{15}, …, 10^{50}` (reciprocals at zero).
pub fn default_probe_points(at: ProbeAt) -> Vec<f64> {
    (0..9)
        .map(|k| 10f64.powi(10 + 5 * k))
        .map(|x| if at == ProbeAt::Zero { 1.0 / x } else { x })
        .collect()
}

/// Averages `ln(f(λx)/f(x))/ln λ` over `λ ∈ {2, 4, 8}` (λ → 1/λ at zero).
pub fn rv_index_probe<F: Fn(f64) -> f64>(f: F, at: ProbeAt) -> Result<RvEstimate> {
    rv_index_probe_on(f, at, &default_probe_points(at))
}

pub fn rv_index_probe_on<F: Fn(f64) -> f64>(f: F, at: ProbeAt, xs: &[f64]) -> Result<RvEstimate> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("probe points"));
    }
    let mut estimates = Vec::with_capacity(xs.len() * LAMBDAS.len());
    for &x in xs {
        let fx = f(x);
        for &lam in &LAMBDAS {
            let lx = if at == ProbeAt::Zero { x / lam } else { x * lam };
            let fl = f(lx);
            if !(fx.is_finite() && fl.is_finite() && fx > 0.0 && fl > 0.0) {
                return Err(Error::Probe(format!("f({x:e}) = {fx}, f({lx:e}) = {fl}")));
            }
            estimates.push((fl / fx).ln() / (lx / x).ln());
        }
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok(RvEstimate { index: mean, dispersion: var.sqrt(), level: f(xs[xs.len() - 1]) })
}

/// Regime read off the probes of `Φ` at zero and of `x ↦ xΦ(e^{-x})` at infinity.
pub fn classify(mech: &ImmigrationMechanism) -> Result<(Regime, RvEstimate)> {
    let at_zero = rv_index_probe(|q| mech.phi(q).unwrap_or(f64::NAN), ProbeAt::Zero)?;
    if at_zero.index.abs() > 0.05 {
        return Ok((Regime::NotSlowlyVarying { index: at_zero.index }, at_zero));
    }
    let f = |x: f64| x * mech.phi_exp_neg(x).unwrap_or(f64::NAN);
    let probe = rv_index_probe(f, ProbeAt::Infinity)?;
    let regime = if probe.index > 0.05 {
        Regime::SuperLog
    } else if probe.index < -0.05 {
        Regime::SubLog
    } else {
        let ratio = f(1e50) / f(1e25);
        if ratio > 1.25 {
            Regime::SuperLog
        } else if ratio < 0.8 {
            Regime::SubLog
        } else {
            Regime::Log
        }
    };
    Ok((regime, probe))
}
