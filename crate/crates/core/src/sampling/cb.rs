use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use super::path::{validate_grid, PathMeta, PathSample};
use super::rng::RngStreamSpec;
use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::mechanisms::{BranchingMechanism, LevyMeasure, PsiClosed};

/// Above this Poisson mean the transition is drawn in log scale.
const LOG_NORMAL_MEAN: f64 = 1e12;

/// Exact CB transition kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CbKernel {
    Linear { b: f64 },
    Feller { b: f64, sigma2: f64 },
}

impl CbKernel {
    pub fn for_mechanism(psi: &BranchingMechanism) -> Result<Self> {
        let plain = matches!(psi.pi, LevyMeasure::Zero);
        match psi.closed {
            Some(PsiClosed::Quadratic) if plain => Ok(if psi.sigma2 == 0.0 {
                CbKernel::Linear { b: psi.b }
            } else {
                CbKernel::Feller { b: psi.b, sigma2: psi.sigma2 }
            }),
            Some(PsiClosed::Stable { d, alpha }) if alpha == 1.0 || d == 0.0 => {
                Ok(if d == 0.0 { CbKernel::Linear { b: 0.0 } } else { CbKernel::Feller { b: 0.0, sigma2: 2.0 * d } })
            }
            _ => Err(Error::Capability(format!(
                "no exact path sampler for `{}`; use the transform oracle `laplace_cbi` instead",
                psi.name
            ))),
        }
    }

    /// One exact step of length `h` from `x`.
    pub fn step<R: Rng>(&self, x: Magnitude, h: f64, rng: &mut R) -> Magnitude {
        if x.is_zero() || h == 0.0 {
            return x;
        }
        match *self {
            CbKernel::Linear { b } => x.scale_exp(-b * h),
            CbKernel::Feller { b, sigma2 } => feller_step(x, h, b, sigma2, rng),
        }
    }
}

/// `X' = Gamma(K, 1/ρ)` with `K ~ Poisson(ρ x e^{-bh})`; `K = 0` absorbs at 0.
fn feller_step<R: Rng>(x: Magnitude, h: f64, b: f64, sigma2: f64, rng: &mut R) -> Magnitude {
    let rho = if b == 0.0 { 2.0 / (sigma2 * h) } else { 2.0 * b / (sigma2 * -(-b * h).exp_m1()) };
    let ln_mean_x = x.ln() - b * h;
    let ln_m = rho.ln() + ln_mean_x;
    if ln_m > LOG_NORMAL_MEAN.ln() {
        // K ≈ m + √m Z₁ and Gamma(K) ≈ K + √K Z₂ give ln X' ≈ ln(m/ρ) + √(2/m) Z
        let z: f64 = StandardNormal.sample(rng);
        let spread = (0.5 * (2f64.ln() - ln_m)).exp();
        return x.scale_exp(-b * h + (spread * z).ln_1p());
    }
    let m = ln_m.exp();
    if !(m > 0.0) {
        return Magnitude::ZERO;
    }
    let k: f64 = Poisson::new(m).expect("finite Poisson mean").sample(rng);
    if k == 0.0 {
        return Magnitude::ZERO;
    }
    let g: f64 = Gamma::new(k, 1.0 / rho).expect("valid gamma").sample(rng);
    Magnitude::from_f64(g)
}

pub fn sample_cb(psi: &BranchingMechanism, x0: f64, grid: &[f64], rng: RngStreamSpec) -> Result<PathSample> {
    validate_grid(grid)?;
    if x0 < 0.0 {
        return Err(Error::Domain(format!("x₀ = {x0} < 0")));
    }
    let kernel = CbKernel::for_mechanism(psi)?;
    let mut r = rng.rng();
    let mut x = Magnitude::from_f64(x0);
    let mut prev = 0.0;
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        x = kernel.step(x, t - prev, &mut r);
        values.push(x);
        prev = t;
    }
    Ok(PathSample {
        times: grid.to_vec(),
        values,
        atoms: None,
        meta: PathMeta { seed: rng.seed, stream: rng.stream, ..Default::default() },
    })
}
