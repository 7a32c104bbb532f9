use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::path::{validate_grid, Atom, PathMeta, PathSample};
use super::rng::RngStreamSpec;
use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::mechanisms::{ImmigrationMechanism, LevyMeasure};

/// Target number of atoms per path when choosing ε.
pub const ATOM_BUDGET: f64 = 2000.0;
/// Largest admissible rate `ν̄(ε)` per unit time.
pub const MAX_RATE: f64 = 1e6;
const MAX_EXPECTED_ATOMS: f64 = 1e8;

/// ε with `T·ν̄(ε) ≈ ATOM_BUDGET` and `ν̄(ε) ≤ MAX_RATE`; zero when the
/// measure is finite and already within budget.
pub fn default_eps(nu: &LevyMeasure, horizon: f64) -> f64 {
    let mass = nu.total_mass();
    if mass.is_finite() && mass * horizon <= ATOM_BUDGET && mass <= MAX_RATE {
        return 0.0;
    }
    nu.inverse_tail((ATOM_BUDGET / horizon).min(MAX_RATE))
}

/// Jumps of size `≥ ε` over `[0, T]`, in decreasing order of size.
///
/// Arrivals `Γ₁ < Γ₂ < …` of a unit Poisson process are mapped to sizes
/// `ν̄⁻¹(Γ_k/T)` and paired with uniform times, stopping once `Γ_k/T > ν̄(ε)`.
/// The count is Poisson(T·ν̄(ε)) and the sizes are iid with law ν restricted
/// to `[ε, ∞)`, as for independent uniform marks. Two horizons driven by the
/// same stream share their largest jumps on the rescaled time axis.
pub fn draw_jumps<R: Rng>(nu: &LevyMeasure, horizon: f64, eps: f64, rng: &mut R) -> Result<Vec<Atom>> {
    let rate = if eps > 0.0 { nu.tail(eps) } else { nu.total_mass() };
    if !rate.is_finite() {
        return Err(Error::Truncation(format!("ν̄({eps}) is infinite; choose ε > 0")));
    }
    if rate * horizon > MAX_EXPECTED_ATOMS {
        return Err(Error::Truncation(format!(
            "{:.3e} expected atoms over [0, {horizon}] at ε = {eps}; raise ε",
            rate * horizon
        )));
    }
    let mut atoms = Vec::with_capacity((rate * horizon * 1.1) as usize + 8);
    if rate == 0.0 {
        return Ok(atoms);
    }
    let mut gamma = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        gamma += e;
        let p = gamma / horizon;
        if p > rate {
            break;
        }
        let time = rng.random::<f64>() * horizon;
        atoms.push(Atom { time, mark: nu.inverse_tail_mag(p) });
    }
    Ok(atoms)
}

/// Sums of jumps at each grid time, plus `drift·t`.
pub(crate) fn accumulate(mut atoms: Vec<Atom>, drift: f64, grid: &[f64]) -> (Vec<Magnitude>, Vec<Atom>) {
    atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut values = Vec::with_capacity(grid.len());
    let mut running = Magnitude::ZERO;
    let mut i = 0;
    for &t in grid {
        while i < atoms.len() && atoms[i].time <= t {
            running = running + atoms[i].mark;
            i += 1;
        }
        values.push(running + Magnitude::from_f64(drift * t));
    }
    (values, atoms)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SubordinatorOptions {
    /// Truncation level; `None` picks [`default_eps`].
    pub eps: Option<f64>,
    pub record_atoms: bool,
}

pub fn sample_subordinator(
    phi: &ImmigrationMechanism,
    horizon: f64,
    grid: &[f64],
    opts: SubordinatorOptions,
    rng: RngStreamSpec,
) -> Result<PathSample> {
    validate_grid(grid)?;
    if !(horizon > 0.0) || grid[grid.len() - 1] > horizon {
        return Err(Error::Domain(format!("grid must lie in [0, T] with T = {horizon} > 0")));
    }
    let eps = opts.eps.unwrap_or_else(|| default_eps(&phi.nu, horizon));
    let drift = phi.beta + phi.nu.truncated_mean(eps)?;
    let mut r = rng.rng();
    let atoms = draw_jumps(&phi.nu, horizon, eps, &mut r)?;
    let count = atoms.len();
    let (values, atoms) = accumulate(atoms, drift, grid);
    Ok(PathSample {
        times: grid.to_vec(),
        values,
        atoms: opts.record_atoms.then_some(atoms),
        meta: PathMeta { seed: rng.seed, stream: rng.stream, eps, atom_count: count, ..Default::default() },
    })
}
