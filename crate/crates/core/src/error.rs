use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("illegal censoring interval ({left}, {right}): {reason}")]
    IllegalInterval {
        left: f64,
        right: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("log-likelihood is not finite: factor for record `{id}` is zero")]
    NonFiniteLikelihood { id: String },

    #[error("quantiles must satisfy 0 < low < high, got ({low}, {high})")]
    QuantileOrder { low: f64, high: f64 },

    #[error("unknown prior preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no chain found a finite initial posterior after {attempts} prior draws")]
    NonFiniteInit { attempts: usize },

    #[error("diagnostic needs at least {needed} {what}, got {actual}")]
    InsufficientDraws {
        what: &'static str,
        needed: usize,
        actual: usize,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("maximum likelihood fit did not converge after {restarts} restarts")]
    NonConvergence { restarts: usize },

    #[error("confidence intervals unavailable: {failed} of {total} bootstrap refits failed")]
    CiUnavailable { failed: usize, total: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
