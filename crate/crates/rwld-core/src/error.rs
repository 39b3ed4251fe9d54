use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Parameter outside its mathematical domain (H outside (1/4,1/2),
    /// non-positive tolerances, malformed grids, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A computation produced a non-finite value; carries the first
    /// offending location for diagnosis.
    #[error("numerical blow-up: {0}")]
    Numerical(String),

    /// Iterative solver exhausted its budget without meeting tolerance.
    #[error("no convergence after {iterations} iterations, last distance {last_distance:e}")]
    NoConvergence {
        iterations: usize,
        last_distance: f64,
        /// Per-iteration distances observed before giving up.
        trace: Vec<f64>,
    },

    /// Covariance could not be represented (indefinite matrix, failed
    /// circulant embedding past the padding cap, ...).
    #[error("covariance construction failed: {0}")]
    Covariance(String),

    /// Serialization and file-format problems.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
