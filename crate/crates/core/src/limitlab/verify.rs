//! Monte Carlo checks of the limit theorems and the transform-level table.

use std::sync::Arc;

use serde::Serialize;

use super::ks::{ks_one_sample, ks_two_sample};
use super::laws::{esn_marginal_cdf_total, fdd_extremal_cdf};
use super::table::{ConvergenceTable, TableRow};
use crate::cumulant::{laplace_cbi, limit_laplace_prop1};
use crate::error::{Error, Result};
use crate::mechanisms::{presets, BranchingMechanism, ImmigrationMechanism, Regime};
use crate::renormalize::{apply_to_ensemble, RenormMap, RenormSample};
use crate::sampling::{
    sample_cbi_shotnoise, sample_ensemble, sample_esn_grid, sample_subordinator, splitmix64, MuTail,
    SubordinatorOptions,
};

const ESN_TAG: u64 = 0x0065_736e;

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloConfig {
    /// Rescaled times with a marginal KS test.
    pub s_grid: Vec<f64>,
    pub t_list: Vec<f64>,
    pub n: usize,
    pub level: f64,
    pub seed: u64,
    /// Truncation level; `None` uses the sampler default.
    pub eps: Option<f64>,
    /// Pair `(s₁, s₂)` for the joint CDF cell check.
    pub joint: Option<(f64, f64)>,
    /// Two-sample KS against direct ESN draws.
    pub esn_cross_check: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            s_grid: vec![1.0],
            t_list: vec![25.0, 50.0, 100.0, 200.0],
            n: 20_000,
            level: super::ks::DEFAULT_LEVEL,
            seed: 1,
            eps: None,
            joint: None,
            esn_cross_check: false,
        }
    }
}

fn increasing_positive(xs: &[f64], what: &'static str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    if xs[0] <= 0.0 || xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} must be positive, finite and increasing")));
    }
    Ok(())
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        increasing_positive(&self.s_grid, "s grid")?;
        increasing_positive(&self.t_list, "t list")?;
        if self.n == 0 {
            return Err(Error::EmptyInput("path count"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidParameter(format!("level {} outside (0, 1)", self.level)));
        }
        if let Some((a, b)) = self.joint {
            if !(0.0 < a && a < b) {
                return Err(Error::InvalidParameter(format!("joint times ({a}, {b}) must satisfy 0 < s₁ < s₂")));
            }
        }
        Ok(())
    }

    /// Every rescaled time that has to be sampled.
    fn sample_times(&self) -> Vec<f64> {
        let mut s = self.s_grid.clone();
        if let Some((a, b)) = self.joint {
            s.extend([a, b]);
        }
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    }
}

/// Cells of a 3×3 grid of quartile levels: `(max |z|, cells with |z| > 3)`.
pub fn joint_cell_check(pairs: &[(f64, f64)], s1: f64, s2: f64) -> Result<(f64, usize)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("joint sample"));
    }
    let n = pairs.len() as f64;
    let quartiles = [0.25, 0.5, 0.75];
    let mut max_z: f64 = 0.0;
    let mut failed = 0;
    for &p1 in &quartiles {
        let y1 = -s1 / f64::ln(p1);
        for &p2 in &quartiles {
            let y2 = -s2 / f64::ln(p2);
            let exact = fdd_extremal_cdf(&[s1, s2], &[y1, y2])?;
            let hits = pairs.iter().filter(|&&(a, b)| a <= y1 && b <= y2).count() as f64;
            let se = (exact * (1.0 - exact) / n).sqrt();
            let z = (hits / n - exact).abs() / se;
            max_z = max_z.max(z);
            failed += (z > 3.0) as usize;
        }
    }
    Ok((max_z, failed))
}

fn ks_columns<F: Fn(f64, f64) -> f64>(
    row: &mut TableRow,
    sample: &RenormSample,
    s_grid: &[f64],
    level: f64,
    cdf: F,
) -> Result<()> {
    let mut worst: f64 = 0.0;
    for &s in s_grid {
        let col = sample.column(s).expect("sampled time");
        let r = ks_one_sample(col, |y| cdf(s, y), level)?;
        row.columns.insert(format!("ks_s={s}"), r.statistic);
        row.tolerance = Some(r.critical);
        worst = worst.max(r.statistic);
    }
    row.discrepancy = worst;
    Ok(())
}

/// Renormalised subordinator against the extremal process, per `t`.
///
/// The same seed drives every `t`, so the tables compare the horizons on
/// common random numbers.
pub fn verify_subordinator_limit(phi: &ImmigrationMechanism, cfg: &MonteCarloConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let name = format!("verify-subordinator[{}]", phi.name);
    if !phi.regime.is_slowly_varying() {
        return Ok(ConvergenceTable::not_applicable(
            &name,
            format!("Φ is {}; the renormalised values collapse and no extremal limit applies", phi.regime.label()),
        ));
    }
    let phi_arc = Arc::new(phi.clone());
    let times = cfg.sample_times();
    let mut table = ConvergenceTable::new(&name, 1);
    for &t in &cfg.t_list {
        let grid: Vec<f64> = times.iter().map(|s| s * t).collect();
        let horizon = grid[grid.len() - 1];
        let opts = SubordinatorOptions { eps: cfg.eps, record_atoms: false };
        let paths = sample_ensemble(cfg.n, cfg.seed, |r| sample_subordinator(phi, horizon, &grid, opts, r))?;
        let sample = apply_to_ensemble(&RenormMap::nonlinear(phi_arc.clone(), t), &paths, &times)?;
        let mut row = TableRow::new(t, 0.0);
        row.n = Some(cfg.n);
        ks_columns(&mut row, &sample, &cfg.s_grid, cfg.level, |s, y| if y > 0.0 { (-s / y).exp() } else { 0.0 })?;
        if let Some((s1, s2)) = cfg.joint {
            let i = times.iter().position(|&x| x == s1).expect("sampled");
            let j = times.iter().position(|&x| x == s2).expect("sampled");
            let (z, failed) = joint_cell_check(&sample.joint(i, j), s1, s2)?;
            row.columns.insert("joint_max_z".into(), z);
            row.columns.insert("joint_cells_failed".into(), failed as f64);
        }
        row.columns.insert("eps".into(), paths[0].meta.eps);
        table.push(row);
    }
    Ok(table)
}

/// Slope and intensity scale of the ESN limit, with the matching value map.
fn esn_target(phi: &ImmigrationMechanism, b: f64, t: f64) -> Option<(f64, RenormMap)> {
    match phi.regime {
        Regime::Log => {
            let c = phi.log_limit?;
            Some((b / c, RenormMap::log_case(c, t)))
        }
        Regime::SuperLog => Some((0.0, RenormMap::nonlinear(Arc::new(phi.clone()), t))),
        _ => None,
    }
}

/// Renormalised shot-noise CBI against `ESN(b/c, 1/x)` marginals.
///
/// In the Log case the map is `ln(1+y)/(ct)`; in the Super-log case it is
/// `g` built from the preset's closed form and the slope is 0.
pub fn verify_cbi_esn_limit(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    cfg: &MonteCarloConfig,
) -> Result<ConvergenceTable> {
    cfg.validate()?;
    let name = format!("verify-cbi-esn[{}+{}]", psi.name, phi.name);
    let Some((gamma, _)) = esn_target(phi, psi.b, 1.0) else {
        return Ok(ConvergenceTable::not_applicable(
            &name,
            format!("immigration regime {} has no ESN limit", phi.regime.label()),
        ));
    };
    let esn = if cfg.esn_cross_check {
        let seed = splitmix64(cfg.seed ^ ESN_TAG);
        let draws = sample_ensemble(cfg.n, seed, |r| sample_esn_grid(gamma, &MuTail::unit(), &cfg.s_grid, r))?;
        Some(draws)
    } else {
        None
    };
    let mut table = ConvergenceTable::new(&name, 1);
    table.notes.push(format!("ESN slope γ = {gamma}"));
    for &t in &cfg.t_list {
        let (_, map) = esn_target(phi, psi.b, t).expect("checked above");
        let grid: Vec<f64> = cfg.s_grid.iter().map(|s| s * t).collect();
        let horizon = grid[grid.len() - 1];
        let paths = sample_ensemble(cfg.n, cfg.seed, |r| sample_cbi_shotnoise(psi, phi, horizon, &grid, cfg.eps, r))?;
        let sample = apply_to_ensemble(&map, &paths, &cfg.s_grid)?;
        let mut row = TableRow::new(t, 0.0);
        row.n = Some(cfg.n);
        ks_columns(&mut row, &sample, &cfg.s_grid, cfg.level, |s, y| esn_marginal_cdf_total(gamma, s, y, 1.0))?;
        if let Some(draws) = &esn {
            let mut rejects = 0;
            for (i, &s) in cfg.s_grid.iter().enumerate() {
                let direct: Vec<f64> = draws.iter().map(|p| p.values[i].value()).collect();
                let r = ks_two_sample(&sample.values[i], &direct, cfg.level)?;
                row.columns.insert(format!("esn_ks2_s={s}"), r.statistic);
                rejects += r.reject as usize;
            }
            row.columns.insert("esn_ks2_rejects".into(), rejects as f64);
        }
        row.columns.insert("eps".into(), paths[0].meta.eps);
        row.columns.insert("mean_atoms".into(), paths.iter().map(|p| p.meta.atom_count as f64).sum::<f64>() / cfg.n as f64);
        table.push(row);
    }
    Ok(table)
}

/// `sup_λ |E_{x₀}[exp(−λΦ⁻¹(1/t)Y_{st})] − limit(λ)|` for stable Ψ, Φ, per `t`.
#[allow(clippy::too_many_arguments)]
pub fn verify_prop1_transforms(
    alpha: f64,
    beta: f64,
    d: f64,
    dprime: f64,
    s: f64,
    lambda_grid: &[f64],
    t_list: &[f64],
    x0: f64,
) -> Result<ConvergenceTable> {
    increasing_positive(t_list, "t list")?;
    if lambda_grid.is_empty() {
        return Err(Error::EmptyInput("λ grid"));
    }
    let psi = presets::stable_branching(d, alpha)?;
    let phi = presets::stable_immigration(dprime, beta)?;
    let limits = lambda_grid
        .iter()
        .map(|&l| limit_laplace_prop1(alpha, beta, d, dprime, s, l))
        .collect::<Result<Vec<_>>>()?;
    let mut table = ConvergenceTable::new("verify-prop1", 0);
    table.notes.push(format!("prelimit started from x₀ = {x0}"));
    for &t in t_list {
        let scale = phi.phi_inverse(1.0 / t)?;
        let mut worst: f64 = 0.0;
        let mut at = 0.0;
        for (&l, &lim) in lambda_grid.iter().zip(&limits) {
            let pre = laplace_cbi(&psi, &phi, x0, s * t, l * scale, 1e-12)?;
            if (pre - lim).abs() > worst {
                worst = (pre - lim).abs();
                at = l;
            }
        }
        table.push(TableRow::new(t, worst).with("scale", scale).with("argmax_lambda", at));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prop1_lambda_zero() {
        let t = verify_prop1_transforms(1.0, 1.0, 1.0, 1.0, 1.0, &[0.0], &[10.0, 100.0], 1.0).unwrap();
        assert!(t.rows.iter().all(|r| r.discrepancy == 0.0));
    }

    #[test]
    fn prop1_from_zero_is_exact_when_indices_match() {
        let t = verify_prop1_transforms(1.0, 1.0, 1.0, 1.0, 1.0, &[0.5, 2.0], &[10.0, 100.0], 0.0).unwrap();
        assert!(t.rows.iter().all(|r| r.discrepancy < 1e-9), "{t:?}");
    }

    #[test]
    fn prop1_subordinator_limit() {
        // β < α: the limit is e^{-sλ^β}
        let t = verify_prop1_transforms(1.0, 0.5, 1.0, 1.0, 1.0, &[0.5, 1.0, 4.0], &[1e2, 1e3, 1e4], 0.0).unwrap();
        assert!(t.strictly_decreasing(), "{t:?}");
        assert!((limit_laplace_prop1(1.0, 0.5, 1.0, 1.0, 2.0, 4.0).unwrap() - (-4.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn non_slowly_varying_is_flagged() {
        let phi = presets::stable_immigration(1.0, 1.0).unwrap();
        let t = verify_subordinator_limit(&phi, &MonteCarloConfig { n: 10, ..Default::default() }).unwrap();
        assert!(!t.applicable && t.rows.is_empty());
    }

    #[test]
    fn sublog_has_no_esn_target() {
        let t = verify_cbi_esn_limit(
            &presets::linear(1.0).unwrap(),
            &presets::sublog().unwrap(),
            &MonteCarloConfig { n: 10, ..Default::default() },
        )
        .unwrap();
        assert!(!t.applicable);
    }

    #[test]
    fn joint_check_on_exact_draws() {
        // exact extremal pairs: E_{s₁} = F^{-1}(U₁)·s₁, E_{s₂} = max(E_{s₁}, (s₂−s₁)-block max)
        use rand::Rng;
        let mut r = crate::sampling::RngStreamSpec::new(5, 0).rng();
        let frechet = |u: f64, s: f64| -s / u.ln();
        let pairs: Vec<(f64, f64)> = (0..20_000)
            .map(|_| {
                let a = frechet(r.random(), 0.5);
                let b = frechet(r.random(), 0.5);
                (a, a.max(b))
            })
            .collect();
        let (z, failed) = joint_cell_check(&pairs, 0.5, 1.0).unwrap();
        assert_eq!(failed, 0, "max z {z}");
    }

    #[test]
    fn config_validation() {
        let bad = MonteCarloConfig { t_list: vec![10.0, 5.0], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MonteCarloConfig { joint: Some((1.0, 0.5)), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
