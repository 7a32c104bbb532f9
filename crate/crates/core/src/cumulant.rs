//! The cumulant `v_t(λ)` solving `∂ₜv = −Ψ(v)`, `v₀ = λ`, and CBI Laplace transforms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{presets, BranchingMechanism, ImmigrationMechanism, PsiClosed};
use crate::quadrature;

/// Horizon beyond which only closed-form flows are accepted.
pub const NUMERIC_HORIZON_CAP: f64 = 1e4;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Tolerance on `v` (relative, with a floor of `tol·1e-6·λ`).
    pub tol: f64,
    /// Tolerance on `∫Φ(v_s) ds`.
    pub int_tol: f64,
    /// Ignore closed-form flows and integrate the ODE.
    pub force_numeric: bool,
    pub max_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, int_tol: 1e-8, force_numeric: false, max_steps: 1_000_000 }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, int_tol: tol.max(1e-13), ..Default::default() }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_local_error: f64,
    pub closed_form: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CumulantSolution {
    pub lambda: f64,
    pub horizon: f64,
    /// Solver mesh and `v` on it.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫₀ᵗ Φ(v_s) ds` on the mesh, when an immigration mechanism was supplied.
    pub integral: Vec<f64>,
    pub stats: SolverStats,
}

impl CumulantSolution {
    pub fn v_final(&self) -> f64 {
        *self.values.last().expect("nonempty solution")
    }

    pub fn integral_final(&self) -> f64 {
        self.integral.last().copied().unwrap_or(0.0)
    }
}

/// Closed-form flow `v_t(λ)` for the preset families, if any.
pub fn closed_flow(psi: &BranchingMechanism, lambda: f64, t: f64) -> Option<f64> {
    match psi.closed? {
        PsiClosed::Stable { d, alpha } => {
            if lambda == 0.0 {
                return Some(0.0);
            }
            Some((lambda.powf(-alpha) + alpha * d * t).powf(-1.0 / alpha))
        }
        PsiClosed::Quadratic => {
            let (b, s2) = (psi.b, psi.sigma2);
            // (1 − e^{-bt})/b, continuous at b = 0
            let k = if b == 0.0 { t } else { -(-b * t).exp_m1() / b };
            Some(lambda * (-b * t).exp() / (1.0 + 0.5 * s2 * lambda * k))
        }
    }
}

// Dormand–Prince 5(4)
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn eval_psi(psi: &BranchingMechanism, v: f64) -> Result<f64> {
    psi.psi(v.max(0.0))
}

fn eval_phi(phi: Option<&ImmigrationMechanism>, v: f64) -> Result<f64> {
    match phi {
        Some(p) => p.phi_levy(v.max(0.0)),
        None => Ok(0.0),
    }
}

/// Adaptive Dormand–Prince integration of `[v, ∫Φ(v)]`.
fn integrate_numeric(
    psi: &BranchingMechanism,
    phi: Option<&ImmigrationMechanism>,
    lambda: f64,
    t: f64,
    opts: &SolveOptions,
) -> Result<CumulantSolution> {
    let mut sol = CumulantSolution {
        lambda,
        horizon: t,
        times: vec![0.0],
        values: vec![lambda],
        integral: vec![0.0],
        stats: SolverStats::default(),
    };
    if t == 0.0 {
        return Ok(sol);
    }
    let atol_v = opts.tol * 1e-6 * lambda.max(1e-300);
    let rtol_v = opts.tol;
    let mut s = 0.0;
    let mut y = [lambda, 0.0];
    let f0 = eval_psi(psi, lambda)?;
    let mut h = if f0 == 0.0 { t } else { (0.01 * lambda / f0.abs()).min(t) };
    let h_min = 1e-14 * t;
    let mut k = [[0.0f64; 2]; 7];
    while s < t {
        if sol.stats.accepted + sol.stats.rejected >= opts.max_steps {
            return Err(Error::Solver {
                at: s,
                reason: "step budget exhausted".into(),
                steps: sol.stats.accepted,
                last_step: h,
            });
        }
        h = h.min(t - s);
        for i in 0..7 {
            let mut yi = y;
            for j in 0..i {
                yi[0] += h * A[i][j] * k[j][0];
                yi[1] += h * A[i][j] * k[j][1];
            }
            k[i] = [-eval_psi(psi, yi[0])?, eval_phi(phi, yi[0])?];
        }
        let mut y5 = y;
        let mut e = [0.0f64; 2];
        for i in 0..7 {
            for c in 0..2 {
                y5[c] += h * B5[i] * k[i][c];
                e[c] += h * (B5[i] - B4[i]) * k[i][c];
            }
        }
        let sc_v = atol_v + rtol_v * y[0].abs().max(y5[0].abs());
        let sc_i = opts.int_tol * (1.0 + y[1].abs().max(y5[1].abs()));
        let err = (e[0].abs() / sc_v).max(e[1].abs() / sc_i);
        if !err.is_finite() {
            return Err(Error::Solver {
                at: s,
                reason: "non-finite derivative (blow-up)".into(),
                steps: sol.stats.accepted,
                last_step: h,
            });
        }
        if err <= 1.0 {
            s = if t - s - h <= 1e-15 * t { t } else { s + h };
            y = y5;
            sol.stats.accepted += 1;
            sol.stats.max_local_error = sol.stats.max_local_error.max(e[0].abs());
            sol.times.push(s);
            sol.values.push(y[0]);
            sol.integral.push(y[1]);
        } else {
            sol.stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < h_min && s < t {
            return Err(Error::Solver {
                at: s,
                reason: "step size underflow".into(),
                steps: sol.stats.accepted,
                last_step: h,
            });
        }
    }
    Ok(sol)
}

/// `∫₀ᵗ Φ(v_s) ds` for a closed-form flow, on geometric panels in time.
fn closed_integral(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    lambda: f64,
    t: f64,
    tol: f64,
) -> Result<f64> {
    if t == 0.0 || lambda == 0.0 {
        return Ok(0.0);
    }
    let mut breaks = vec![0.0];
    let mut p = t * 1e-9;
    while p < t {
        breaks.push(p);
        p *= 10.0;
    }
    breaks.push(t);
    let f = |s: f64| phi.phi_levy(closed_flow(psi, lambda, s).unwrap_or(f64::NAN)).unwrap_or(f64::NAN);
    Ok(quadrature::integrate_breaks(f, &breaks, tol * 1e-3, tol)?.value)
}

pub fn solve(
    psi: &BranchingMechanism,
    phi: Option<&ImmigrationMechanism>,
    lambda: f64,
    t: f64,
    opts: &SolveOptions,
) -> Result<CumulantSolution> {
    if lambda < 0.0 || t < 0.0 {
        return Err(Error::Domain(format!("cumulant needs λ ≥ 0 and t ≥ 0, got λ={lambda}, t={t}")));
    }
    if !opts.force_numeric {
        if let Some(v) = closed_flow(psi, lambda, t) {
            let integral = match phi {
                Some(p) => closed_integral(psi, p, lambda, t, opts.int_tol)?,
                None => 0.0,
            };
            return Ok(CumulantSolution {
                lambda,
                horizon: t,
                times: vec![0.0, t],
                values: vec![lambda, v],
                integral: vec![0.0, integral],
                stats: SolverStats { closed_form: true, ..Default::default() },
            });
        }
    }
    if t > NUMERIC_HORIZON_CAP {
        return Err(Error::Solver {
            at: 0.0,
            reason: format!("numeric flows are limited to t ≤ {NUMERIC_HORIZON_CAP}"),
            steps: 0,
            last_step: 0.0,
        });
    }
    integrate_numeric(psi, phi, lambda, t, opts)
}

pub fn solve_v(psi: &BranchingMechanism, lambda: f64, t: f64, tol: f64) -> Result<f64> {
    Ok(solve(psi, None, lambda, t, &SolveOptions::with_tol(tol))?.v_final())
}

/// `E_{x₀}[e^{-λY_t}] = exp(−x₀v_t(λ) − ∫₀ᵗ Φ(v_s(λ)) ds)`, with Φ the
/// Lévy–Khintchine exponent of the immigration measure.
pub fn laplace_cbi(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    x0: f64,
    t: f64,
    lambda: f64,
    tol: f64,
) -> Result<f64> {
    laplace_cbi_with(psi, phi, x0, t, lambda, &SolveOptions::with_tol(tol))
}

pub fn laplace_cbi_with(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    x0: f64,
    t: f64,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    if x0 < 0.0 {
        return Err(Error::Domain(format!("x₀ = {x0} < 0")));
    }
    if t == 0.0 {
        return Ok((-lambda * x0).exp());
    }
    let sol = solve(psi, Some(phi), lambda, t, opts)?;
    Ok((-x0 * sol.v_final() - sol.integral_final()).exp())
}

/// Laplace transform at time `s` of the limiting CBI(Ψ̄, Φ̄) started from 0.
pub fn limit_laplace_prop1(alpha: f64, beta: f64, d: f64, dprime: f64, s: f64, lambda: f64) -> Result<f64> {
    if !(0.0 < beta && beta <= alpha && alpha <= 1.0) || d < 0.0 || dprime <= 0.0 {
        return Err(Error::Domain(format!(
            "need 0 < β ≤ α ≤ 1, d ≥ 0, d' > 0; got α={alpha}, β={beta}, d={d}, d'={dprime}"
        )));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let (psi_bar, phi_bar) = if beta == alpha {
        (presets::stable_branching(d / dprime, alpha)?, presets::stable_immigration(1.0, alpha)?)
    } else {
        (presets::zero_branching(), presets::stable_immigration(1.0, beta)?)
    };
    laplace_cbi(&psi_bar, &phi_bar, 0.0, s, lambda, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::presets::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn numeric() -> SolveOptions {
        SolveOptions { force_numeric: true, ..SolveOptions::with_tol(1e-11) }
    }

    #[test]
    fn examples() {
        let sq = stable_branching(1.0, 1.0).unwrap();
        assert_relative_eq!(solve_v(&sq, 1.0, 1.0, 1e-10).unwrap(), 0.5, max_relative = 1e-12);
        assert_eq!(solve_v(&zero_branching(), 2.5, 7.0, 1e-10).unwrap(), 2.5);
        assert_relative_eq!(solve_v(&linear(2.0).unwrap(), 3.0, 1.0, 1e-10).unwrap(), 3.0 * (-2f64).exp(), max_relative = 1e-14);
        let s32 = stable_branching(1.0, 0.5).unwrap();
        assert_relative_eq!(solve_v(&s32, 4.0, 1.0, 1e-10).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn numeric_matches_closed_flows() {
        let cases = [
            (stable_branching(1.0, 1.0).unwrap(), 1.0, 1.0),
            (stable_branching(1.0, 0.5).unwrap(), 4.0, 1.0),
            (feller(1.0, 2.0).unwrap(), 2.0, 3.0),
            (feller(-0.5, 1.0).unwrap(), 0.3, 2.0),
            (linear(2.0).unwrap(), 3.0, 1.0),
        ];
        for (psi, lam, t) in cases {
            let n = solve(&psi, None, lam, t, &numeric()).unwrap();
            assert!(!n.stats.closed_form);
            assert_relative_eq!(n.v_final(), closed_flow(&psi, lam, t).unwrap(), max_relative = 1e-9);
        }
    }

    #[test]
    fn laplace_examples() {
        let sq = stable_branching(1.0, 1.0).unwrap();
        let id = stable_immigration(1.0, 1.0).unwrap();
        assert_relative_eq!(laplace_cbi(&sq, &id, 0.0, 2.0, 1.0, 1e-10).unwrap(), 1.0 / 3.0, max_relative = 1e-10);
        let n = laplace_cbi_with(&sq, &id, 0.0, 2.0, 1.0, &numeric()).unwrap();
        assert_relative_eq!(n, 1.0 / 3.0, max_relative = 1e-9);
        assert_relative_eq!(laplace_cbi(&sq, &id, 1.5, 0.0, 2.0, 1e-10).unwrap(), (-3f64).exp());
        let log = log_immigration(1.0).unwrap();
        let sub = laplace_cbi(&zero_branching(), &log, 0.0, 3.0, 0.7, 1e-10).unwrap();
        assert_relative_eq!(sub, (-3.0 * log.phi_levy(0.7).unwrap()).exp(), max_relative = 1e-9);
    }

    #[test]
    fn prop1_limit_examples() {
        assert_relative_eq!(limit_laplace_prop1(1.0, 0.5, 1.0, 1.0, 1.0, 1.0).unwrap(), (-1f64).exp(), max_relative = 1e-10);
        assert_relative_eq!(limit_laplace_prop1(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.5, max_relative = 1e-10);
        assert_eq!(limit_laplace_prop1(1.0, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(limit_laplace_prop1(0.5, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn numeric_horizon_cap() {
        let custom = crate::mechanisms::BranchingMechanism::from_measure(
            "exp",
            1.0,
            0.0,
            crate::mechanisms::LevyMeasure::Exponential { mass: 1.0, rate: 1.0 },
        )
        .unwrap();
        assert!(matches!(solve_v(&custom, 1.0, 2e4, 1e-10), Err(Error::Solver { .. })));
    }

    #[test]
    fn monotone_mesh() {
        let psi = feller(1.0, 2.0).unwrap();
        let sol = solve(&psi, None, 3.0, 5.0, &numeric()).unwrap();
        assert!(sol.values.windows(2).all(|w| w[1] <= w[0]));
        let psi = linear(-1.0).unwrap();
        let sol = solve(&psi, None, 0.5, 2.0, &numeric()).unwrap();
        assert!(sol.values.windows(2).all(|w| w[1] >= w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn flow_property(t in 0.01f64..3.0, s in 0.01f64..3.0, lam in 0.01f64..10.0) {
            let psi = feller(0.7, 1.3).unwrap();
            let o = numeric();
            let direct = solve(&psi, None, lam, t + s, &o).unwrap().v_final();
            let mid = solve(&psi, None, lam, s, &o).unwrap().v_final();
            let composed = solve(&psi, None, mid, t, &o).unwrap().v_final();
            prop_assert!((direct - composed).abs() <= 10.0 * 1e-11 * direct.max(1e-3));
        }

        #[test]
        fn monotone_in_lambda(t in 0.01f64..5.0, l1 in 0.0f64..5.0, dl in 0.0f64..5.0) {
            let psi = stable_branching(1.0, 0.5).unwrap();
            prop_assert!(solve_v(&psi, l1, t, 1e-10).unwrap() <= solve_v(&psi, l1 + dl, t, 1e-10).unwrap());
        }

        #[test]
        fn laplace_in_unit_interval_and_monotone(x0 in 0.0f64..3.0, dx in 0.0f64..2.0, lam in 0.0f64..4.0, dl in 0.0f64..2.0) {
            let psi = feller(1.0, 2.0).unwrap();
            let phi = exponential_immigration(1.0, 1.0).unwrap();
            let a = laplace_cbi(&psi, &phi, x0, 1.0, lam, 1e-10).unwrap();
            let b = laplace_cbi(&psi, &phi, x0 + dx, 1.0, lam, 1e-10).unwrap();
            let c = laplace_cbi(&psi, &phi, x0, 1.0, lam + dl, 1e-10).unwrap();
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(b <= a + 1e-12 && c <= a + 1e-12);
        }

        #[test]
        fn stable_closed_form_grid(lam in 1e-3f64..1e3, t in 1e-3f64..1e2, alpha in prop::sample::select(vec![0.5f64, 1.0])) {
            let psi = stable_branching(1.0, alpha).unwrap();
            let n = solve(&psi, None, lam, t, &numeric()).unwrap().v_final();
            let exact = (lam.powf(-alpha) + alpha * t).powf(-1.0 / alpha);
            prop_assert!(((n - exact) / exact).abs() <= 1e-8);
        }
    }
}
