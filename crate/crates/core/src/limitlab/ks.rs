//! Kolmogorov–Smirnov statistics with asymptotic critical values.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KsKind {
    OneSample,
    TwoSample,
}

#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n: usize,
    /// Size of the second sample for two-sample tests.
    pub m: Option<usize>,
    pub critical: f64,
    pub level: f64,
    pub reject: bool,
    pub kind: KsKind,
}

/// `c(α) = √(−ln(α/2)/2)`, the upper-α quantile of the Kolmogorov distribution.
pub fn kolmogorov_quantile(level: f64) -> f64 {
    (-(0.5 * level).ln() / 2.0).sqrt()
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("KS sample"));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("KS sample contains NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Exact `sup|F_n − F|` for a continuous `cdf`, ties handled blockwise.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]).clamp(0.0, 1.0);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(d)
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, level: f64) -> Result<KsReport> {
    let statistic = ks_statistic(samples, cdf)?;
    let n = samples.len();
    let critical = kolmogorov_quantile(level) / (n as f64).sqrt();
    Ok(KsReport { statistic, n, m: None, critical, level, reject: statistic > critical, kind: KsKind::OneSample })
}

pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KsReport> {
    let (x, y) = (sorted(a)?, sorted(b)?);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => break,
        };
        while i < x.len() && x[i] == next {
            i += 1;
        }
        while j < y.len() && y[j] == next {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let critical = kolmogorov_quantile(level) * ((n + m) / (n * m)).sqrt();
    Ok(KsReport {
        statistic: d,
        n: x.len(),
        m: Some(y.len()),
        critical,
        level,
        reject: d > critical,
        kind: KsKind::TwoSample,
    })
}
