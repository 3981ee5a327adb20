use thiserror::Error;

/// Errors surfaced by measure parsing, grid construction, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("tree structure error: {0}")]
    Structure(String),

    #[error("{what} outside grid extent: {detail}")]
    Extent { what: String, detail: String },

    #[error("solver did not converge after {iterations} sweeps (residual history tail: {history:?})")]
    SolveDiverged {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("profile step {dr} too large: energy drift {drift:.3e} exceeds {allowed:.3e}")]
    ProfileStep { dr: f64, drift: f64, allowed: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
