//! Generators of the renormalised CBI `g(Y_{st})` and of the ESN limit.

use serde::Serialize;

use super::table::{ConvergenceTable, TableRow};
use super::testfn::TestFunction;
use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::mechanisms::{tail_integral, BranchingMechanism, ImmigrationMechanism, LevyMeasure, Regime};
use crate::quadrature;
use crate::sampling::MuTail;

const ABS_TOL: f64 = 1e-11;
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeneratorTerms {
    pub t: f64,
    pub x: f64,
    /// Drift.
    pub i1: f64,
    /// Immigration jumps.
    pub i2: f64,
    /// Diffusion.
    pub i3: f64,
    /// Branching jumps.
    pub i4: f64,
    pub total: f64,
}

/// Breakpoints on `[lo, hi]` clustered geometrically towards `lo`.
fn clustered(lo: f64, hi: f64) -> Vec<f64> {
    let w = hi - lo;
    let mut b = vec![lo];
    b.extend([1e-12, 1e-9, 1e-6, 1e-4, 1e-2, 0.1, 0.4].iter().map(|k| lo + k * w));
    b.push(hi);
    b
}

/// `∫_x^∞ f'(z)·k(z) dz` over the slopes of `f`.
fn slope_integral<K: Fn(f64) -> f64>(f: &TestFunction, x: f64, k: K) -> Result<f64> {
    let mut total = 0.0;
    for (lo, hi) in f.slopes() {
        let lo = lo.max(x);
        if hi <= lo {
            continue;
        }
        let r = quadrature::integrate_breaks(|z| f.d1(z) * k(z), &clustered(lo, hi), ABS_TOL, REL_TOL)?;
        total += r.value;
    }
    Ok(total)
}

fn require_closed(phi: &ImmigrationMechanism) -> Result<()> {
    if phi.closed.is_none() {
        return Err(Error::Capability(format!("{} has no closed-form Φ, Φ', Φ''", phi.name)));
    }
    Ok(())
}

/// `A^{(t)}f(x) = I₁ + I₂ + I₃ + I₄` for the process `g(Y_{st})`.
///
/// `I₂` uses the form `t∫_x^∞ f'(z) ν̄(g⁻¹(z) − g⁻¹(x)) dz`.
pub fn generator_prelimit(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    f: &TestFunction,
    t: f64,
    x: f64,
) -> Result<GeneratorTerms> {
    require_closed(phi)?;
    if !(t > 0.0) || !(x >= 0.0) {
        return Err(Error::Domain(format!("need t > 0 and x ≥ 0, got t = {t}, x = {x}")));
    }
    let zero = GeneratorTerms { t, x, i1: 0.0, i2: 0.0, i3: 0.0, i4: 0.0, total: 0.0 };
    if f.is_flat() {
        return Ok(zero);
    }
    let y = phi.g_scaled_inverse(t * x)?;
    let (_, f1, f2) = f.eval(x);

    let ginv = |z: f64| phi.g_scaled_inverse(t * z);
    let i2 = t * slope_integral(f, x, |z| match ginv(z) {
        Ok(gz) => phi.nu.tail_mag(gz.saturating_sub(y)),
        Err(_) => f64::NAN,
    })?;
    if y.is_zero() {
        return Ok(GeneratorTerms { i2, total: i2, ..zero });
    }

    let (yg1, yg2) = phi.g_scaled_derivatives(y)?;
    let inv_y = (-y.ln()).exp();
    let i1 = f1 * (phi.beta * yg1 * inv_y - psi.b * yg1);
    let i3 = 0.5 * psi.sigma2 * (f2 * yg1 * yg1 * inv_y / t + f1 * yg2 * inv_y);
    // (f∘g)' and (f∘g)'' at y
    let fg1 = f1 * yg1 * inv_y / t;
    let fg2 = (f2 * yg1 * yg1 / t + f1 * yg2) * inv_y * inv_y / t;
    let i4 = branching_jump_term(psi, phi, f, t, y, fg1, fg2)?;
    Ok(GeneratorTerms { t, x, i1, i2, i3, i4, total: i1 + i2 + i3 + i4 })
}

/// `t·y·∫(f∘g(y+u) − f∘g(y) − u(f∘g)'(y)) π(du)`, split at the larger of the
/// cutoff `C` and `10⁻³(1+y)`; the jumps above it are compensated by
/// `a_C = ∫_C^∞ u π(du)`.
fn branching_jump_term(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    f: &TestFunction,
    t: f64,
    y: Magnitude,
    fg1: f64,
    fg2: f64,
) -> Result<f64> {
    if matches!(psi.pi, LevyMeasure::Zero) {
        return Ok(0.0);
    }
    let yv = y.value();
    if !yv.is_finite() {
        // g is flat on any bounded jump at this level
        return Ok(0.0);
    }
    let density = |u: f64| psi.pi.density(u).unwrap_or(f64::NAN);
    let fg = |u: f64| match phi.g_scaled(Magnitude::from_f64(yv + u)) {
        Ok(g) => f.f(g / t),
        Err(_) => f64::NAN,
    };
    let fg0 = fg(0.0);
    // below u_T the difference is replaced by its second-order Taylor term,
    // which avoids cancellation against the singular density
    let u_t = 1e-3 * (1.0 + yv);
    let c = psi.jump_cutoff()?.max(u_t);
    let head = quadrature::integrate_log_panels(|u| u * u * density(u), u_t * 1e-12, u_t, ABS_TOL, REL_TOL)?.value;
    let mut small = 0.5 * fg2 * head;
    if c > u_t {
        small += quadrature::integrate_log_panels(|u| (fg(u) - fg0 - u * fg1) * density(u), u_t, c, ABS_TOL, REL_TOL)?
            .value;
    }
    // beyond g⁻¹(a₄) the integrand is constant
    let edge = (phi.g_scaled_inverse(t * f.a[3])?.value() - yv).max(c);
    let mut big = 0.0;
    if edge > c {
        big += quadrature::integrate_log_panels(|u| (fg(u) - fg0) * density(u), c, edge, ABS_TOL, REL_TOL)?.value;
    }
    big += (f.offset - fg0) * psi.pi.tail(edge);
    let a_c = c * psi.pi.tail(c) + tail_integral(&psi.pi, c)?;
    Ok(t * yv * (small + big - a_c * fg1))
}

/// `∫_x^∞ f'(z) μ̄(z) dz − (b/c) f'(x)`; `c = ∞` drops the drift.
pub fn generator_limit(b: f64, c: f64, mu: &MuTail, f: &TestFunction, x: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("limiting drift −(b/c)f' diverges at c = {c}")));
    }
    if f.is_flat() {
        return Ok(0.0);
    }
    let jumps = slope_integral(f, x, |z| mu.tail(z))?;
    let drift = if c.is_infinite() { 0.0 } else { b / c * f.d1(x) };
    Ok(jumps - drift)
}

/// Intensity scale `c` of the limit: the Log constant, or `∞` in the Super-log case.
fn limit_scale(phi: &ImmigrationMechanism) -> Option<f64> {
    match phi.regime {
        Regime::Log => phi.log_limit,
        Regime::SuperLog => Some(f64::INFINITY),
        _ => None,
    }
}

/// `max_x |A^{(t)}f(x) − Af(x)|` per `t`.
///
/// In the Sub-log regime the limiting drift diverges; the table then carries
/// `max_x |I₁|` in the discrepancy column and is flagged as such.
pub fn generator_convergence_table(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    f: &TestFunction,
    x_grid: &[f64],
    t_list: &[f64],
) -> Result<ConvergenceTable> {
    if x_grid.is_empty() || t_list.is_empty() {
        return Err(Error::EmptyInput("x grid or t list"));
    }
    let name = format!("generator-table[{}+{}]", psi.name, phi.name);
    let scale = limit_scale(phi);
    if scale.is_none() && phi.regime != Regime::SubLog {
        return Ok(ConvergenceTable::not_applicable(&name, format!("regime {} has no ESN limit", phi.regime.label())));
    }
    let limits = match scale {
        Some(c) => Some(x_grid.iter().map(|&x| generator_limit(psi.b, c, &MuTail::unit(), f, x)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let mut table = ConvergenceTable::new(&name, 0);
    if limits.is_none() {
        table.applicable = false;
        table.notes.push("Sub-log regime: the limiting drift diverges; discrepancy holds max |I1|".into());
    }
    let mut first_i1 = None;
    for &t in t_list {
        let mut worst: f64 = 0.0;
        let mut at = x_grid[0];
        let mut max_i1: f64 = 0.0;
        for (k, &x) in x_grid.iter().enumerate() {
            let terms = generator_prelimit(psi, phi, f, t, x)?;
            max_i1 = max_i1.max(terms.i1.abs());
            let d = match &limits {
                Some(l) => (terms.total - l[k]).abs(),
                None => terms.i1.abs(),
            };
            if d > worst {
                worst = d;
                at = x;
            }
        }
        let first = *first_i1.get_or_insert(max_i1);
        let row = TableRow::new(t, worst).with("argmax_x", at).with("max_abs_i1", max_i1);
        table.push(if first > 0.0 { row.with("i1_growth", max_i1 / first) } else { row });
    }
    if !table.applicable {
        table.monotone_trend = false;
    }
    Ok(table)
}

/// `|I₁(t, x)|` per `t`, with its growth relative to the first row.
pub fn drift_term_table(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    f: &TestFunction,
    x: f64,
    t_list: &[f64],
) -> Result<ConvergenceTable> {
    let mut table = ConvergenceTable::new(&format!("drift-term[{}+{}] at x={x}", psi.name, phi.name), 0);
    let mut first = None;
    for &t in t_list {
        let i1 = generator_prelimit(psi, phi, f, t, x)?.i1.abs();
        let base = *first.get_or_insert(i1);
        table.push(TableRow::new(t, i1).with("growth", if base > 0.0 { i1 / base } else { f64::NAN }));
    }
    Ok(table)
}

/// `t·ν̄(g⁻¹(v) − g⁻¹(x))` per `t`, read against `1/v`.
pub fn fastjump_check(phi: &ImmigrationMechanism, x: f64, v: f64, t_list: &[f64]) -> Result<ConvergenceTable> {
    require_closed(phi)?;
    let mut table = ConvergenceTable::new(&format!("fastjump[{}] x={x} v={v}", phi.name), 0);
    for &t in t_list {
        let gv = phi.g_scaled_inverse(t * v)?;
        let gx = phi.g_scaled_inverse(t * x)?;
        if gv.ll() <= gx.ll() {
            return Err(Error::Domain(format!("g⁻¹(v) ≤ g⁻¹(x) at t = {t}, x = {x}, v = {v}")));
        }
        let value = t * phi.nu.tail_mag(gv.saturating_sub(gx));
        table.push(TableRow::new(t, (value - 1.0 / v).abs()).with("value", value).with("target", 1.0 / v));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::presets::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_function_has_zero_generator() {
        let f = TestFunction::constant(3.0);
        let g = generator_prelimit(&feller(1.0, 2.0).unwrap(), &log_immigration(1.0).unwrap(), &f, 100.0, 1.2).unwrap();
        assert_eq!(g.total, 0.0);
        assert_eq!(generator_limit(1.0, 1.0, &MuTail::unit(), &f, 1.2).unwrap(), 0.0);
        let t = generator_convergence_table(&linear(1.0).unwrap(), &log_immigration(1.0).unwrap(), &f, &[0.5, 1.0], &[10.0, 100.0])
            .unwrap();
        assert!(t.rows.iter().all(|r| r.discrepancy == 0.0));
    }

    #[test]
    fn limit_beyond_support_vanishes() {
        assert_eq!(generator_limit(1.0, 1.0, &MuTail::unit(), &TestFunction::default(), 3.5).unwrap(), 0.0);
    }

    #[test]
    fn limit_of_a_ramp() {
        // f' ≈ 1 on [1, 2], falling far away: ∫ f'(z)/z dz against direct quadrature
        let f = TestFunction::bump([1.0, 2.0, 1e3, 1e3 + 1.0]).unwrap();
        let got = generator_limit(0.0, 1.0, &MuTail::unit(), &f, 0.5).unwrap();
        let rise = quadrature::integrate(|z| f.d1(z) / z, 1.0, 2.0, 1e-14, 1e-13).unwrap().value;
        let fall = quadrature::integrate(|z| f.d1(z) / z, 1e3, 1e3 + 1.0, 1e-14, 1e-13).unwrap().value;
        assert_relative_eq!(got, rise + fall, max_relative = 1e-9);
        assert!((got - std::f64::consts::LN_2).abs() < 0.05);
    }

    #[test]
    fn immigration_term_matches_direct_form() {
        // I₂ = t∫(f∘g(y+u) − f∘g(y)) ν(du) by density quadrature
        let phi = log_immigration(1.0).unwrap();
        let f = TestFunction::default();
        let (t, x) = (3.0, 0.8);
        let pre = generator_prelimit(&zero_branching(), &phi, &f, t, x).unwrap();
        let y = phi.g_scaled_inverse(t * x).unwrap().value();
        let fx = f.f(phi.g_scaled(Magnitude::from_f64(y)).unwrap() / t);
        let upper = phi.g_scaled_inverse(t * f.a[3]).unwrap().value() - y;
        let integrand = |u: f64| {
            let g = phi.g_scaled(Magnitude::from_f64(y + u)).unwrap() / t;
            (f.f(g) - fx) * phi.nu.density(u).unwrap()
        };
        let floor = 0.01;
        let body = quadrature::integrate_log_panels(integrand, floor, upper, 1e-13, 1e-11).unwrap().value;
        // jumps past the support land where f = 0
        let tail = -fx * phi.nu.tail(upper);
        assert_relative_eq!(pre.i2, t * (body + tail), max_relative = 1e-6);
    }

    #[test]
    fn log_preset_drift_tends_to_minus_b_over_c() {
        let f = TestFunction::bump([0.5, 1.5, 2.5, 3.5]).unwrap();
        let phi = log_immigration(2.0).unwrap();
        let g = generator_prelimit(&linear(1.0).unwrap(), &phi, &f, 1e3, 1.0).unwrap();
        assert_relative_eq!(g.i1, -0.5 * f.d1(1.0), max_relative = 1e-9);
    }

    #[test]
    fn log_preset_close_to_limit() {
        let f = TestFunction::default();
        let psi = linear(1.0).unwrap();
        let phi = log_immigration(1.0).unwrap();
        for &x in &[0.7, 1.0, 2.5] {
            let pre = generator_prelimit(&psi, &phi, &f, 1e3, x).unwrap().total;
            let lim = generator_limit(1.0, 1.0, &MuTail::unit(), &f, x).unwrap();
            assert!((pre - lim).abs() < 0.05, "x = {x}: {pre} vs {lim}");
        }
    }

    #[test]
    fn diffusion_and_branching_jumps_fade() {
        let f = TestFunction::default();
        let phi = log_immigration(1.0).unwrap();
        let small = |psi: &BranchingMechanism, t: f64| {
            let g = generator_prelimit(psi, &phi, &f, t, 0.8).unwrap();
            (g.i3.abs(), g.i4.abs())
        };
        let feller = feller(1.0, 2.0).unwrap();
        assert!(small(&feller, 100.0).0 < small(&feller, 10.0).0);
        let stable = stable_branching(1.0, 0.5).unwrap();
        let (_, a) = small(&stable, 2.0);
        let (_, b) = small(&stable, 20.0);
        assert!(b < a, "{a} → {b}");
    }

    #[test]
    fn fastjump_examples() {
        let phi = log_immigration(1.0).unwrap();
        let t = fastjump_check(&phi, 1.0, 2.0, &[10.0, 1e2, 1e3, 1e4]).unwrap();
        assert!((t.last().unwrap().columns["value"] - 0.5).abs() <= 0.05);
        assert!(t.rows[1..].iter().all(|r| r.discrepancy <= t.rows[0].discrepancy));
        let zero = fastjump_check(&phi, 0.0, 3.0, &[1e3]).unwrap();
        assert_relative_eq!(zero.rows[0].columns["value"], 1.0 / 3.0, max_relative = 1e-9);
        assert!(fastjump_check(&phi, 0.0, 1e12, &[1e3]).unwrap().rows[0].columns["value"] < 1e-11);
        assert!(fastjump_check(&phi, 2.0, 1.0, &[10.0]).is_err());
    }

    #[test]
    fn sublog_limit_is_undefined() {
        assert!(generator_limit(1.0, 0.0, &MuTail::unit(), &TestFunction::default(), 1.0).is_err());
    }
}
