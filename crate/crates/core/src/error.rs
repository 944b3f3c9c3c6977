use thiserror::Error;

/// Errors produced by the solver, the analysis suites and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("negative power applied to a field with nonzero mean (|mean| = {mean:e}, norm = {norm:e})")]
    NegativePowerOfMeanMode { mean: f64, norm: f64 },

    #[error("advective CFL number {cfl:.4} exceeds 1")]
    CflViolation { cfl: f64 },

    #[error("non-finite coefficient encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("velocity is not solenoidal (relative divergence {residual:e})")]
    NotSolenoidal { residual: f64 },

    #[error("exponent relation violated: {0}")]
    RelationViolated(String),

    #[error("test function support does not fit: {0}")]
    SupportOverflow(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
