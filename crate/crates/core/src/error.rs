use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite potential sample at x = {x}")]
    NonFinite { x: f64 },

    #[error("expression error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("degenerate boundary form: {0}")]
    Degenerate(String),

    #[error("lambda = {lambda} lies outside the admissible domain: Upsilon = {upsilon:.3e} >= 1/(8k^4) = {threshold:.3e}")]
    OutsideDomain {
        lambda: num_complex::Complex64,
        upsilon: f64,
        threshold: f64,
    },

    #[error("iteration did not converge after {iterations} steps (last update {last_update:.3e})")]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("lambda is too close to an unperturbed eigenvalue: |Delta0| = {0:.3e}")]
    NearEigenvalue(f64),

    #[error("integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("contour passes through a zero of the characteristic determinant")]
    ContourThroughZero,

    #[error("lambda is not an eigenvalue: singular values {smallest:.3e} / {largest:.3e}")]
    NotEigenvalue { smallest: f64, largest: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
