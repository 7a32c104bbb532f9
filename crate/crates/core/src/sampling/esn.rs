use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::path::{validate_grid, Atom, PathMeta, PathSample};
use super::rng::RngStreamSpec;
use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::quadrature;

/// Tail `μ̄` of the ESN intensity measure.
#[derive(Clone)]
pub enum MuTail {
    /// `μ̄(x) = c/x`
    Inverse { c: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for MuTail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MuTail::Inverse { c } => write!(f, "MuTail::Inverse({c})"),
            MuTail::Custom(_) => write!(f, "MuTail::Custom"),
        }
    }
}

impl MuTail {
    pub fn unit() -> Self {
        MuTail::Inverse { c: 1.0 }
    }

    pub fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::INFINITY;
        }
        match self {
            MuTail::Inverse { c } => c / x,
            MuTail::Custom(f) => f(x),
        }
    }

    /// `∫₀^h μ̄(y + γv) dv`, infinite when `y + γv` reaches 0 inside `[0, h]`.
    pub fn void_exponent(&self, gamma: f64, h: f64, y: f64) -> Result<f64> {
        if h == 0.0 {
            return Ok(0.0);
        }
        if y <= 0.0 || y + gamma * h <= 0.0 {
            return Ok(f64::INFINITY);
        }
        match self {
            MuTail::Inverse { c } => Ok(if gamma == 0.0 { c * h / y } else { c / gamma * (gamma * h / y).ln_1p() }),
            MuTail::Custom(f) => Ok(quadrature::integrate(|v| f(y + gamma * v), 0.0, h, 1e-14, 1e-11)?.value),
        }
    }

    /// Draws `Z` with `P(Z ≤ y) = exp(−∫₀^h μ̄(y + γv) dv)` from `U`.
    fn inverse_void(&self, gamma: f64, h: f64, u: f64) -> Result<f64> {
        let target = -u.ln();
        match self {
            MuTail::Inverse { c } => Ok(if gamma == 0.0 {
                c * h / target
            } else {
                gamma * h / (gamma * target / c).exp_m1()
            }),
            MuTail::Custom(_) => {
                // exponent is decreasing in y
                let mut lo = (-gamma * h).max(0.0);
                let mut hi = lo + 1.0;
                while self.void_exponent(gamma, h, hi)? > target {
                    hi = lo + 2.0 * (hi - lo);
                    if hi > 1e300 {
                        return Err(Error::Domain("μ̄ has no finite tail".into()));
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.void_exponent(gamma, h, mid)? > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-14 * hi {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }
}

/// Exact sequential ESN sampling on a grid: `M_{s+h} = max(M_s − γh, Z_h)`.
pub fn sample_esn_grid(gamma: f64, mu: &MuTail, times: &[f64], rng: RngStreamSpec) -> Result<PathSample> {
    validate_grid(times)?;
    if !mu.tail(1.0).is_finite() {
        return Err(Error::Domain("μ̄ must be finite on (0, ∞)".into()));
    }
    let mut r = rng.rng();
    let mut prev = 0.0;
    let mut m: Option<f64> = None;
    let mut values = Vec::with_capacity(times.len());
    for &s in times {
        let h = s - prev;
        let next = if h > 0.0 {
            let u: f64 = r.random();
            let z = mu.inverse_void(gamma, h, u.max(f64::MIN_POSITIVE))?;
            m.map_or(z, |m| (m - gamma * h).max(z))
        } else {
            m.unwrap_or(0.0)
        };
        m = Some(next);
        values.push(Magnitude::from_f64(next.max(0.0)));
        prev = s;
    }
    Ok(PathSample {
        times: times.to_vec(),
        values,
        atoms: None,
        meta: PathMeta { seed: rng.seed, stream: rng.stream, ..Default::default() },
    })
}

/// Evaluates `M_s = max_{u ≤ s} (ξ_u − γ(s − u))` from atoms above ε.
///
/// A value is flagged as censored when the kept supremum lies below
/// `ε + max(−γ, 0)·s`, the largest level a discarded atom could reach.
pub fn esn_from_atoms(gamma: f64, atoms: &[Atom], times: &[f64], eps: f64) -> (Vec<Magnitude>, Vec<bool>) {
    let mut values = Vec::with_capacity(times.len());
    let mut censored = Vec::with_capacity(times.len());
    for &s in times {
        let kept = atoms
            .iter()
            .filter(|a| a.time <= s)
            .map(|a| a.mark.value() - gamma * (s - a.time))
            .fold(f64::NEG_INFINITY, f64::max);
        let band = eps + (-gamma).max(0.0) * s;
        censored.push(kept < band);
        values.push(Magnitude::from_f64(kept.max(0.0)));
    }
    (values, censored)
}

pub fn sample_esn_atoms(
    gamma: f64,
    mu: &MuTail,
    horizon: f64,
    eps: f64,
    times: &[f64],
    rng: RngStreamSpec,
) -> Result<PathSample> {
    validate_grid(times)?;
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("ε = {eps} must be positive")));
    }
    if times[times.len() - 1] > horizon {
        return Err(Error::Coverage { horizon, requested: times[times.len() - 1] });
    }
    let rate = mu.tail(eps);
    let mut r = rng.rng();
    let n = if rate * horizon > 0.0 { Poisson::new(rate * horizon).expect("finite rate").sample(&mut r) as usize } else { 0 };
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n {
        let time = r.random::<f64>() * horizon;
        let u: f64 = r.random();
        let mark = match mu {
            MuTail::Inverse { .. } => eps / (1.0 - u),
            MuTail::Custom(f) => invert_tail(&**f, (1.0 - u) * rate, eps),
        };
        atoms.push(Atom { time, mark: Magnitude::from_f64(mark) });
    }
    let (values, censored) = esn_from_atoms(gamma, &atoms, times, eps);
    Ok(PathSample {
        times: times.to_vec(),
        values,
        atoms: Some(atoms),
        meta: PathMeta {
            seed: rng.seed,
            stream: rng.stream,
            eps,
            truncation_bias: eps + (-gamma).max(0.0) * horizon,
            atom_count: n,
            censored,
        },
    })
}

fn invert_tail(f: &(dyn Fn(f64) -> f64 + Send + Sync), p: f64, eps: f64) -> f64 {
    let (mut lo, mut hi) = (eps, eps * 2.0);
    while f(hi) >= p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}
