use std::collections::BTreeMap;

use statrs::function::gamma::gamma;

use super::branching::{BranchingMechanism, PsiClosed};
use super::immigration::{ImmigrationMechanism, PhiClosed, Regime};
use super::levy::{LevyMeasure, SlowShape};
use crate::error::{Error, Result};

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Immigration,
    Branching,
}

#[derive(Debug, Clone)]
pub struct PresetInfo {
    pub name: &'static str,
    pub kind: PresetKind,
    pub params: &'static [(&'static str, f64)],
    pub formula: &'static str,
}

/// Lower bound of the tail floor for the slowly varying presets.
pub const DEFAULT_FLOOR: f64 = 0.01;

pub const CATALOGUE: &[PresetInfo] = &[
    PresetInfo {
        name: "stable_immigration",
        kind: PresetKind::Immigration,
        params: &[("d", 1.0), ("beta", 0.5)],
        formula: "Φ(q) = d·q^β",
    },
    PresetInfo {
        name: "log_immigration",
        kind: PresetKind::Immigration,
        params: &[("c", 1.0), ("floor", DEFAULT_FLOOR)],
        formula: "ν̄(u) = c/ln(1+u), Φ(q) = c/ln(1+1/q)",
    },
    PresetInfo {
        name: "superlog_iterlog",
        kind: PresetKind::Immigration,
        params: &[("floor", DEFAULT_FLOOR)],
        formula: "ν̄(u) = 1/ln(1+ln(1+u))",
    },
    PresetInfo {
        name: "superlog_delta",
        kind: PresetKind::Immigration,
        params: &[("delta", 1.0), ("floor", 0.0)],
        formula: "ν̄(u) = ln(1+ln(1+u))/ln(1+u)^δ",
    },
    PresetInfo {
        name: "sublog",
        kind: PresetKind::Immigration,
        params: &[("floor", DEFAULT_FLOOR)],
        formula: "ν̄(u) = 1/ln(1+u)^2",
    },
    PresetInfo {
        name: "exponential_immigration",
        kind: PresetKind::Immigration,
        params: &[("mass", 1.0), ("rate", 1.0)],
        formula: "ν̄(u) = mass·e^{-rate·u}, Φ(q) = mass·q/(rate+q)",
    },
    PresetInfo {
        name: "stable_branching",
        kind: PresetKind::Branching,
        params: &[("d", 1.0), ("alpha", 1.0)],
        formula: "Ψ(q) = d·q^{1+α}",
    },
    PresetInfo { name: "linear", kind: PresetKind::Branching, params: &[("b", 1.0)], formula: "Ψ(q) = b·q" },
    PresetInfo {
        name: "feller",
        kind: PresetKind::Branching,
        params: &[("b", 1.0), ("sigma2", 2.0)],
        formula: "Ψ(q) = b·q + σ²q²/2",
    },
    PresetInfo { name: "zero", kind: PresetKind::Branching, params: &[], formula: "Ψ ≡ 0" },
];

fn info(name: &str) -> Result<&'static PresetInfo> {
    CATALOGUE.iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

/// Defaults merged with the supplied values; unknown keys are rejected.
fn resolve(info: &PresetInfo, given: &Params) -> Result<Params> {
    let mut out: Params = info.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !out.contains_key(k) {
            return Err(Error::InvalidParameter(format!("preset `{}` has no parameter `{k}`", info.name)));
        }
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{}.{k} = {v}", info.name)));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

fn positive(p: &Params, key: &str) -> Result<f64> {
    let v = p[key];
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("`{key}` must be positive, got {v}")))
    }
}

fn slow(name: &str, shape: SlowShape, floor: f64, regime: Regime, log_moment: bool, p: Params) -> Result<ImmigrationMechanism> {
    let min_floor = shape.a_min().exp_m1();
    let floor = floor.max(min_floor);
    if floor <= 0.0 && !matches!(shape, SlowShape::SuperLogDelta { delta } if delta >= 1.0) {
        return Err(Error::InvalidParameter(format!("`{name}` needs a positive floor")));
    }
    let mut m = ImmigrationMechanism::from_measure(name, 0.0, LevyMeasure::Slow { shape, floor })?;
    m.params = p;
    m.params.insert("floor".into(), floor);
    m.closed = Some(PhiClosed::Slow(shape));
    m.regime = regime;
    m.log_moment = log_moment;
    m.rv_index = 0.0;
    if let SlowShape::Log { c } = shape {
        m.log_limit = Some(c);
    }
    Ok(m)
}

pub fn stable_immigration(d: f64, beta: f64) -> Result<ImmigrationMechanism> {
    immigration_preset("stable_immigration", &[("d".to_string(), d), ("beta".to_string(), beta)].into())
}

pub fn log_immigration(c: f64) -> Result<ImmigrationMechanism> {
    immigration_preset("log_immigration", &[("c".to_string(), c)].into())
}

pub fn superlog_iterlog() -> Result<ImmigrationMechanism> {
    immigration_preset("superlog_iterlog", &Params::new())
}

pub fn superlog_delta(delta: f64) -> Result<ImmigrationMechanism> {
    immigration_preset("superlog_delta", &[("delta".to_string(), delta)].into())
}

pub fn sublog() -> Result<ImmigrationMechanism> {
    immigration_preset("sublog", &Params::new())
}

pub fn exponential_immigration(mass: f64, rate: f64) -> Result<ImmigrationMechanism> {
    immigration_preset("exponential_immigration", &[("mass".to_string(), mass), ("rate".to_string(), rate)].into())
}

pub fn immigration_preset(name: &str, given: &Params) -> Result<ImmigrationMechanism> {
    let info = info(name)?;
    if info.kind != PresetKind::Immigration {
        return Err(Error::InvalidParameter(format!("`{name}` is a branching preset")));
    }
    let p = resolve(info, given)?;
    match name {
        "stable_immigration" => {
            let d = positive(&p, "d")?;
            let beta = positive(&p, "beta")?;
            if beta > 1.0 {
                return Err(Error::InvalidParameter(format!("stable index β = {beta} > 1")));
            }
            let mut m = if beta == 1.0 {
                ImmigrationMechanism::from_measure(name, d, LevyMeasure::Zero)?
            } else {
                let nu = LevyMeasure::Power { coeff: d / gamma(1.0 - beta), index: beta };
                ImmigrationMechanism::from_measure(name, 0.0, nu)?
            };
            m.params = p;
            m.closed = Some(PhiClosed::Stable { d, beta });
            m.regime = Regime::NotSlowlyVarying { index: beta };
            m.rv_index = beta;
            m.log_moment = true;
            Ok(m)
        }
        "exponential_immigration" => {
            let mass = positive(&p, "mass")?;
            let rate = positive(&p, "rate")?;
            let mut m = ImmigrationMechanism::from_measure(name, 0.0, LevyMeasure::Exponential { mass, rate })?;
            m.params = p;
            m.closed = Some(PhiClosed::Exponential { mass, rate });
            m.regime = Regime::NotSlowlyVarying { index: 1.0 };
            m.rv_index = 1.0;
            m.log_moment = true;
            Ok(m)
        }
        "log_immigration" => {
            let c = positive(&p, "c")?;
            let floor = positive(&p, "floor")?;
            slow(name, SlowShape::Log { c }, floor, Regime::Log, false, p)
        }
        "superlog_iterlog" => {
            let floor = positive(&p, "floor")?;
            slow(name, SlowShape::IterLog, floor, Regime::SuperLog, false, p)
        }
        "superlog_delta" => {
            let delta = positive(&p, "delta")?;
            if delta > 1.0 {
                return Err(Error::InvalidParameter(format!("δ = {delta} must lie in (0, 1]")));
            }
            let floor = p["floor"].max(0.0);
            slow(name, SlowShape::SuperLogDelta { delta }, floor, Regime::SuperLog, false, p)
        }
        "sublog" => {
            let floor = positive(&p, "floor")?;
            slow(name, SlowShape::SubLog, floor, Regime::SubLog, true, p)
        }
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

pub fn stable_branching(d: f64, alpha: f64) -> Result<BranchingMechanism> {
    branching_preset("stable_branching", &[("d".to_string(), d), ("alpha".to_string(), alpha)].into())
}

pub fn linear(b: f64) -> Result<BranchingMechanism> {
    branching_preset("linear", &[("b".to_string(), b)].into())
}

pub fn feller(b: f64, sigma2: f64) -> Result<BranchingMechanism> {
    branching_preset("feller", &[("b".to_string(), b), ("sigma2".to_string(), sigma2)].into())
}

pub fn zero_branching() -> BranchingMechanism {
    branching_preset("zero", &Params::new()).expect("zero preset")
}

pub fn branching_preset(name: &str, given: &Params) -> Result<BranchingMechanism> {
    let info = info(name)?;
    if info.kind != PresetKind::Branching {
        return Err(Error::InvalidParameter(format!("`{name}` is an immigration preset")));
    }
    let p = resolve(info, given)?;
    let mut m = match name {
        "stable_branching" => {
            let d = p["d"];
            let alpha = positive(&p, "alpha")?;
            if d < 0.0 || alpha > 1.0 {
                return Err(Error::InvalidParameter(format!("stable branching needs d ≥ 0, α ∈ (0,1]; got d={d}, α={alpha}")));
            }
            let mut m = if alpha == 1.0 || d == 0.0 {
                BranchingMechanism::from_measure(name, 0.0, 2.0 * d, LevyMeasure::Zero)?
            } else {
                let coeff = d * alpha / gamma(1.0 - alpha);
                BranchingMechanism::from_measure(name, 0.0, 0.0, LevyMeasure::Power { coeff, index: 1.0 + alpha })?
            };
            m.closed = Some(PsiClosed::Stable { d, alpha });
            m
        }
        "linear" => {
            let mut m = BranchingMechanism::from_measure(name, p["b"], 0.0, LevyMeasure::Zero)?;
            m.closed = Some(PsiClosed::Quadratic);
            m
        }
        "feller" => {
            let sigma2 = p["sigma2"];
            if sigma2 < 0.0 {
                return Err(Error::InvalidParameter(format!("σ² = {sigma2} < 0")));
            }
            let mut m = BranchingMechanism::from_measure(name, p["b"], sigma2, LevyMeasure::Zero)?;
            m.closed = Some(PsiClosed::Quadratic);
            m
        }
        "zero" => {
            let mut m = BranchingMechanism::from_measure(name, 0.0, 0.0, LevyMeasure::Zero)?;
            m.closed = Some(PsiClosed::Quadratic);
            m
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    m.params = p;
    Ok(m)
}

/// Every immigration preset at its default parameters.
pub fn all_immigration_presets() -> Vec<ImmigrationMechanism> {
    CATALOGUE
        .iter()
        .filter(|p| p.kind == PresetKind::Immigration)
        .map(|p| immigration_preset(p.name, &Params::new()).expect("default preset"))
        .collect()
}

pub fn all_branching_presets() -> Vec<BranchingMechanism> {
    CATALOGUE
        .iter()
        .filter(|p| p.kind == PresetKind::Branching)
        .map(|p| branching_preset(p.name, &Params::new()).expect("default preset"))
        .collect()
}
