use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    /// Invalid or inconsistent configuration (bad law tag, mismatched shapes, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The MDE solver did not reach its tolerance.
    #[error("MDE solver did not converge after {iterations} iterations (residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    /// The stability operator is numerically singular.
    #[error("singular stability operator: |beta| = {beta_abs:e}")]
    SingularStability { beta_abs: f64 },

    /// `1 - <M^2>` vanished in the variance formula.
    #[error("singular variance denominator: |1 - <M^2>| = {0:e}")]
    SingularVariance(f64),

    /// A regularisation denominator fell below the guard threshold.
    #[error("numerical instability: {0}")]
    Instability(String),

    /// Generic numerical failure (eigendecomposition, DBM step control, ...).
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
