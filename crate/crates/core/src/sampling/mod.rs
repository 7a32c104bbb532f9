//! Exact and truncated path samplers, all driven by [`RngStreamSpec`] streams.

mod cb;
mod cbi;
mod esn;
mod export;
mod path;
mod rng;
mod subordinator;

pub use cb::{sample_cb, CbKernel};
pub use cbi::sample_cbi_shotnoise;
pub use esn::{esn_from_atoms, sample_esn_atoms, sample_esn_grid, MuTail};
pub use export::{write_atoms_csv, write_paths_csv};
pub use path::{validate_grid, Atom, PathMeta, PathSample};
pub use rng::{splitmix64, RngStreamSpec};
pub use subordinator::{default_eps, draw_jumps, sample_subordinator, SubordinatorOptions, ATOM_BUDGET, MAX_RATE};

use rayon::prelude::*;

use crate::error::Result;

/// Runs `f` on streams `0..n` of `seed` in parallel; output is in stream order
/// and does not depend on the thread count.
pub fn sample_ensemble<T, F>(n: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RngStreamSpec) -> Result<T> + Sync,
{
    (0..n as u64).into_par_iter().map(|k| f(RngStreamSpec::new(seed, k))).collect()
}
