use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("support model violated: {0}")]
    ModelViolation(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("least-squares system is singular (smallest singular value {sigma_min:.3e})")]
    Singular { sigma_min: f64 },

    #[error("enumeration needs {required} subsets, budget is {budget}; use bound mode")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("parameter regime violated: {0}")]
    RegimeViolation(String),

    #[error("no admissible threshold: x_min = {x_min} is below 14 xi (xi = {xi})")]
    InfeasibleOmega { xi: f64, x_min: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
