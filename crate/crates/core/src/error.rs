use thiserror::Error;

/// Errors produced by the reduction, continuation and verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("resonance: {0}")]
    Resonance(String),

    #[error("polar chart singular: rho = {rho:e} below {rho_min:e} for mode {mode}")]
    PolarSingularity { mode: usize, rho: f64, rho_min: f64 },

    #[error("eigen solver: {0}")]
    Eigen(String),

    #[error("missing prerequisite: {0}")]
    Missing(String),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
