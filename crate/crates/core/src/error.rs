use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input specification (bad norm parameters, bad polygon, bad solver options).
    #[error("configuration error: {0}")]
    Config(String),
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Derivative tensors blow up at the requested point.
    #[error("singularity error: {0}")]
    Singular(String),
    #[error("integration failure at t = {t}: {detail} (last step {step})")]
    Integration { t: f64, step: f64, detail: String },
    /// No sign change of `m(a) - target` was found on the scanned grid.
    #[error("could not bracket m(a) = {target}; scanned {} grid points", table.len())]
    Bracketing { target: f64, table: Vec<(f64, f64)> },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
