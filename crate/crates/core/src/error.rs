use thiserror::Error;

/// Errors raised by the statistics, simulation and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "singular sample covariance (eigenvalue ratio {ratio:.3e}); \
         need n >= d + 1 observations in general position"
    )]
    SingularCovariance { ratio: f64 },

    #[error("unsupported dimension d = {d} (maximum {max})")]
    UnsupportedDimension { d: usize, max: usize },

    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    #[error("sample too large for the literal O(n^5) evaluation: n = {n} > {max}")]
    TooLargeForNaive { n: usize, max: usize },

    #[error("quadrature accuracy check failed: {0}")]
    Accuracy(String),

    #[error("matrix factorization failed: {0}")]
    Factorization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
