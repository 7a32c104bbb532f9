//! Space-time renormalisation maps applied to path ensembles.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::magnitude::Magnitude;
use crate::mechanisms::ImmigrationMechanism;
use crate::sampling::PathSample;

pub const DEFAULT_S_GRID: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// `1/(t·F(1/y))`, with `1/∞ = 0` and `1/0 = ∞`.
pub fn g_map<F: Fn(f64) -> f64>(f: F, t: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let fv = f(1.0 / y);
    if fv <= 0.0 {
        return f64::INFINITY;
    }
    1.0 / (t * fv)
}

/// `Φ⁻¹(1/t)·y`.
pub fn linear_map(phi: &ImmigrationMechanism, t: f64, y: f64) -> Result<f64> {
    Ok(phi.phi_inverse(1.0 / t)? * y)
}

#[derive(Debug, Clone)]
pub enum MapKind {
    Identity,
    /// Multiplication by a fixed scale, e.g. `Φ⁻¹(1/t)`.
    Linear { scale: f64 },
    /// `g(y) = 1/(t·F(1/y))` with the closed-form `F` of the mechanism.
    Nonlinear(Arc<ImmigrationMechanism>),
    /// `ln(1 + y)/(c·t)`.
    LogCase { c: f64 },
}

#[derive(Debug, Clone)]
pub struct RenormMap {
    pub kind: MapKind,
    pub t: f64,
}

impl RenormMap {
    pub fn identity(t: f64) -> Self {
        RenormMap { kind: MapKind::Identity, t }
    }

    pub fn linear(phi: &ImmigrationMechanism, t: f64) -> Result<Self> {
        Ok(RenormMap { kind: MapKind::Linear { scale: phi.phi_inverse(1.0 / t)? }, t })
    }

    pub fn nonlinear(phi: Arc<ImmigrationMechanism>, t: f64) -> Self {
        RenormMap { kind: MapKind::Nonlinear(phi), t }
    }

    pub fn log_case(c: f64, t: f64) -> Self {
        RenormMap { kind: MapKind::LogCase { c }, t }
    }

    pub fn apply(&self, y: Magnitude) -> Result<f64> {
        Ok(match &self.kind {
            MapKind::Identity => y.value(),
            MapKind::Linear { scale } => {
                if y.is_zero() {
                    0.0
                } else {
                    (y.ln() + scale.ln()).exp()
                }
            }
            MapKind::Nonlinear(phi) => phi.g_scaled(y)? / self.t,
            MapKind::LogCase { c } => y.ln1p() / (c * self.t),
        })
    }

    pub fn label(&self) -> String {
        match &self.kind {
            MapKind::Identity => "identity".into(),
            MapKind::Linear { scale } => format!("linear(scale={scale:e})"),
            MapKind::Nonlinear(phi) => format!("g[{}]", phi.name),
            MapKind::LogCase { c } => format!("ln(1+y)/({c}t)"),
        }
    }
}

/// Renormalised values `map(Y_{s·t})`, one column per `s`, rows in path order.
#[derive(Debug, Clone, Serialize)]
pub struct RenormSample {
    pub t: f64,
    pub s_grid: Vec<f64>,
    pub streams: Vec<u64>,
    /// `values[i][k]` is the value at `s_grid[i]` for path `k`.
    pub values: Vec<Vec<f64>>,
}

impl RenormSample {
    pub fn column(&self, s: f64) -> Option<&[f64]> {
        self.s_grid.iter().position(|&x| x == s).map(|i| self.values[i].as_slice())
    }

    /// `(map(Y_{s₁t}), map(Y_{s₂t}))` per path.
    pub fn joint(&self, i: usize, j: usize) -> Vec<(f64, f64)> {
        self.values[i].iter().copied().zip(self.values[j].iter().copied()).collect()
    }

    /// Writes `s,stream,value` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "s,stream,value")?;
        for (i, s) in self.s_grid.iter().enumerate() {
            for (k, v) in self.values[i].iter().enumerate() {
                writeln!(out, "{},{},{}", s, self.streams[k], v)?;
            }
        }
        Ok(())
    }
}

pub fn apply_to_ensemble(map: &RenormMap, paths: &[PathSample], s_grid: &[f64]) -> Result<RenormSample> {
    if s_grid.is_empty() {
        return Err(Error::EmptyInput("s grid"));
    }
    let rows: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| s_grid.iter().map(|&s| map.apply(p.value_at(s * map.t)?)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let values = (0..s_grid.len()).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    Ok(RenormSample {
        t: map.t,
        s_grid: s_grid.to_vec(),
        streams: paths.iter().map(|p| p.meta.stream).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::presets::*;
    use crate::sampling::PathMeta;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn path(times: Vec<f64>, values: Vec<f64>) -> PathSample {
        PathSample {
            values: values.into_iter().map(Magnitude::from_f64).collect(),
            times,
            atoms: None,
            meta: PathMeta::default(),
        }
    }

    #[test]
    fn g_map_examples() {
        assert_relative_eq!(g_map(f64::sqrt, 10.0, 4.0), 0.2);
        assert_eq!(g_map(f64::sqrt, 10.0, 0.0), 0.0);
        let m = log_immigration(3.0).unwrap();
        for &y in &[0.5, 10.0, 1e6] {
            let direct = g_map(|q| m.phi(q).unwrap(), 7.0, y);
            assert_relative_eq!(direct, y.ln_1p() / 21.0, max_relative = 1e-12);
            let mapped = RenormMap::nonlinear(Arc::new(m.clone()), 7.0).apply(Magnitude::from_f64(y)).unwrap();
            assert_relative_eq!(mapped, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn linear_map_examples() {
        let phi = stable_immigration(1.0, 0.5).unwrap();
        assert_relative_eq!(linear_map(&phi, 100.0, 2.0).unwrap(), 2e-4, max_relative = 1e-10);
        assert_eq!(linear_map(&phi, 100.0, 0.0).unwrap(), 0.0);
        let phi = stable_immigration(1.0, 0.25).unwrap();
        assert_relative_eq!(linear_map(&phi, 16.0, 1.0).unwrap(), 16f64.powi(-4), max_relative = 1e-9);
    }

    #[test]
    fn ensemble_evaluation() {
        let p = path(vec![1.0, 2.0, 4.0], vec![1.0, 3.0, 5.0]);
        let r = apply_to_ensemble(&RenormMap::identity(2.0), std::slice::from_ref(&p), &[0.5, 1.0, 1.5, 2.0]).unwrap();
        let col: Vec<f64> = r.values.iter().map(|c| c[0]).collect();
        for (a, b) in col.iter().zip([1.0, 3.0, 3.0, 5.0]) {
            assert_relative_eq!(*a, b, max_relative = 1e-14);
        }
        let err = apply_to_ensemble(&RenormMap::identity(2.0), &[p], &[3.0]).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }

    #[test]
    fn constant_path_under_g() {
        let phi = Arc::new(stable_immigration(2.0, 0.5).unwrap());
        let p = path(vec![0.1, 10.0], vec![9.0, 9.0]);
        let r = apply_to_ensemble(&RenormMap::nonlinear(phi, 5.0), &[p], &[1.0, 2.0]).unwrap();
        let expected = g_map(|q| 2.0 * q.sqrt(), 5.0, 9.0);
        assert_relative_eq!(r.values[0][0], expected, max_relative = 1e-12);
        assert_relative_eq!(r.values[1][0], expected, max_relative = 1e-12);
    }

    #[test]
    fn log_case_recovers_time() {
        let (c, t) = (2.0, 3.0);
        let grid = vec![0.75, 1.5, 3.0, 6.0];
        let p = path(grid.clone(), grid.iter().map(|&u| (c * u).exp_m1()).collect());
        let r = apply_to_ensemble(&RenormMap::log_case(c, t), &[p], &DEFAULT_S_GRID).unwrap();
        for (i, s) in DEFAULT_S_GRID.iter().enumerate() {
            assert_relative_eq!(r.values[i][0], *s, max_relative = 1e-12);
        }
    }

    #[test]
    fn equivalent_f_maps_merge() {
        // F₁(q) = c/ln(1+1/q) and F₂(q) = c/ln(1/q) agree at 0
        let c = 1.0;
        let f1 = |q: f64| c / (1.0 / q).ln_1p();
        let f2 = |q: f64| c / (1.0 / q).ln();
        let mut prev = f64::INFINITY;
        for t in [10.0, 100.0, 1000.0] {
            let sup = (1..200)
                .map(|k| (0.05 * k as f64 * c * t).exp())
                .map(|y| (g_map(f1, t, y) - g_map(f2, t, y)).abs())
                .fold(0.0, f64::max);
            assert!(sup < prev);
            prev = sup;
        }
    }

    proptest! {
        #[test]
        fn maps_are_monotone(a in 0.0f64..1e6, b in 0.0f64..1e6, t in 1.0f64..1e4) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let phi = Arc::new(superlog_iterlog().unwrap());
            let maps = [
                RenormMap::identity(t),
                RenormMap::linear(&stable_immigration(1.0, 0.5).unwrap(), t).unwrap(),
                RenormMap::nonlinear(phi, t),
                RenormMap::log_case(2.0, t),
            ];
            for m in &maps {
                let x = m.apply(Magnitude::from_f64(lo)).unwrap();
                let y = m.apply(Magnitude::from_f64(hi)).unwrap();
                prop_assert!(x <= y * (1.0 + 1e-12), "{}: {x} > {y}", m.label());
            }
        }
    }
}
