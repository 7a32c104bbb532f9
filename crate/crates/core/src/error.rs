use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integrability error: {0}")]
    Integrability(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("value {value} is outside the range of the mechanism (sup = {sup})")]
    Range { value: f64, sup: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cumulant solver failed at t = {at}: {reason} (steps = {steps}, last h = {last_step:e})")]
    Solver {
        at: f64,
        reason: String,
        steps: usize,
        last_step: f64,
    },

    #[error("unsupported by this sampler: {0}")]
    Capability(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("path horizon {horizon} does not cover requested time {requested}")]
    Coverage { horizon: f64, requested: f64 },

    #[error("regular-variation probe failed: {0}")]
    Probe(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown mechanism preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("output error: {0}")]
    Output(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
