use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Lyapunov system is singular or its solution is not positive definite,
    /// which happens exactly when the input matrix is not Hurwitz.
    #[error("singular or indefinite: {0}")]
    SingularOrIndefinite(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("eigenvalue oracle failed: {0}")]
    OracleFailure(String),

    #[error("non-finite derivative at t = {t} (component {component})")]
    Divergence { t: f64, component: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
