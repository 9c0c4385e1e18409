use thiserror::Error;

/// Errors raised by the solver modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("coincident-particle geometry: {0}")]
    CoincidentGeometry(String),

    #[error("grid too coarse: {what} drifted by {drift:.3e} (tolerance {tol:.1e})")]
    Accuracy { what: String, drift: f64, tol: f64 },

    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize, history: Vec<f64> },

    #[error("factorization failed at shift {shift} K: {reason}")]
    Factorization { shift: f64, reason: String },

    #[error("out of scope: {0}")]
    OutOfScope(String),

    #[error("asymptotic fit residual {residual:.3e} exceeds {threshold:.1e}; enlarge the box")]
    AsymptoticRegion { residual: f64, threshold: f64 },

    #[error("no resonance detected: {0}")]
    NoResonance(String),

    #[error("matrix inversion failed: {0}")]
    Singular(String),

    #[error("parameter file {path}: {reason}")]
    ParameterFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
