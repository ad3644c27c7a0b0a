use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    /// A singular value cannot be produced by the sigmoid constraint with the
    /// requested center/radius. Carries a center/radius pair that would work.
    #[error(
        "singular value {value} outside [{lo}, {hi}]; try --sigma-star {suggested_center} --r {suggested_radius}"
    )]
    Range {
        value: f64,
        lo: f64,
        hi: f64,
        suggested_center: f64,
        suggested_radius: f64,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
