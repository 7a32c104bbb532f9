use serde::Serialize;

use crate::error::{Error, Result};
use crate::magnitude::Magnitude;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub time: f64,
    /// Jump size or ESN mark, as `ln(1 + ln(1 + x))` via [`Magnitude`].
    #[serde(skip)]
    pub mark: Magnitude,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PathMeta {
    pub seed: u64,
    pub stream: u64,
    pub eps: f64,
    /// Upper bound on the mean contribution of discarded small atoms at the horizon.
    pub truncation_bias: f64,
    pub atom_count: usize,
    /// ESN values whose supremum fell inside the discarded band.
    pub censored: Vec<bool>,
}

/// A càdlàg path recorded on a grid, with an optional atom record.
#[derive(Debug, Clone, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<Magnitude>,
    pub atoms: Option<Vec<Atom>>,
    pub meta: PathMeta,
}

impl PathSample {
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Value at the largest grid time `≤ s`.
    pub fn value_at(&self, s: f64) -> Result<Magnitude> {
        if s > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::Coverage { horizon: self.horizon(), requested: s });
        }
        let idx = self.times.partition_point(|&t| t <= s * (1.0 + 1e-12));
        if idx == 0 {
            return Err(Error::Coverage { horizon: self.horizon(), requested: s });
        }
        Ok(self.values[idx - 1])
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.value()).collect()
    }
}

/// Checks a grid is nonempty, strictly increasing and nonnegative.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("time grid"));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be nonnegative and strictly increasing".into()));
    }
    Ok(())
}
