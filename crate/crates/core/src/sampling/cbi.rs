use super::cb::CbKernel;
use super::path::{validate_grid, PathMeta, PathSample};
use super::rng::RngStreamSpec;
use super::subordinator::{default_eps, draw_jumps};
use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::mechanisms::{BranchingMechanism, ImmigrationMechanism};

/// Word stride between the graft streams of consecutive immigrants.
const GRAFT_STRIDE: u32 = 24;
const GRAFT_TAG: u64 = 0x6772_6166_7473;

/// CBI path as a Poisson shot noise: `Y_s = Σ_{u ≤ s} X^u_{s−u}`.
///
/// Immigrants below ε are dropped; `meta.truncation_bias` is `T·∫₀^ε u ν(du)`.
/// Each immigrant's CB graft is evaluated only at grid times after its arrival.
pub fn sample_cbi_shotnoise(
    psi: &BranchingMechanism,
    phi: &ImmigrationMechanism,
    horizon: f64,
    grid: &[f64],
    eps: Option<f64>,
    rng: RngStreamSpec,
) -> Result<PathSample> {
    validate_grid(grid)?;
    if phi.beta > 0.0 {
        return Err(Error::Capability("shot-noise construction needs β = 0 in Φ".into()));
    }
    if !(horizon > 0.0) || grid[grid.len() - 1] > horizon {
        return Err(Error::Domain(format!("grid must lie in [0, T] with T = {horizon} > 0")));
    }
    let kernel = CbKernel::for_mechanism(psi)?;
    let eps = eps.unwrap_or_else(|| default_eps(&phi.nu, horizon));
    let bias = horizon * phi.nu.truncated_mean(eps)?;

    let mut r = rng.rng();
    let atoms = draw_jumps(&phi.nu, horizon, eps, &mut r)?;
    let mut graft_rng = rng.derive(GRAFT_TAG).rng();
    let mut totals = vec![Magnitude::ZERO; grid.len()];
    for (k, atom) in atoms.iter().enumerate() {
        graft_rng.set_word_pos((k as u128) << GRAFT_STRIDE);
        let start = grid.partition_point(|&t| t < atom.time);
        let mut x = atom.mark;
        let mut prev = atom.time;
        for j in start..grid.len() {
            x = kernel.step(x, grid[j] - prev, &mut graft_rng);
            prev = grid[j];
            if x.is_zero() {
                break;
            }
            totals[j] = totals[j] + x;
        }
    }
    Ok(PathSample {
        times: grid.to_vec(),
        values: totals,
        atoms: None,
        meta: PathMeta {
            seed: rng.seed,
            stream: rng.stream,
            eps,
            truncation_bias: bias,
            atom_count: atoms.len(),
            censored: Vec::new(),
        },
    })
}
