use thiserror::Error;

/// Errors raised across the waveform-design pipeline.
#[derive(Debug, Error)]
pub enum WiseError {
    #[error("parse error{}: {message}", location.as_ref().map(|l| format!(" at {l}")).unwrap_or_default())]
    Parse {
        message: String,
        location: Option<String>,
    },

    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("angle {0} deg outside [-90, 90]")]
    AngleDomain(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("degenerate value: {0}")]
    Degenerate(String),

    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("inconsistent slack data: {0}")]
    Slack(String),

    #[error("solver reported infeasible problem (largest residual in {family}: {residual:e})")]
    Infeasible { family: String, residual: f64 },

    #[error("solver numerical failure: {0}")]
    NumericalFailure(String),

    #[error("reference waveform: {0}")]
    Reference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WiseError>;
