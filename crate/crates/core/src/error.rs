use thiserror::Error;

/// Errors raised by the library.
///
/// The variants are coarse on purpose: the command-line driver maps each one
/// to a process exit code (input/config → 2, data → 3, numerical → 4).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: dimension mismatches, non-positive bandwidths and the like.
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration that cannot describe a valid mechanism (e.g. δ = 0 with finite ε).
    #[error("configuration error: {0}")]
    Config(String),

    /// A server holding no samples was asked for a kernel statistic.
    #[error("server {server} holds no samples")]
    EmptyServer { server: usize },

    /// Parameters outside the scope a closed-form result was derived for.
    #[error("out of scope: {0}")]
    Scope(String),

    /// A problem whose effective information is too small to build a bandwidth grid.
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    /// Ingestion failures with row context.
    #[error("data error: {0}")]
    Data(String),

    /// Factorisation or other floating point failures.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
