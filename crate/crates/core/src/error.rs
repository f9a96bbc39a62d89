use thiserror::Error;

/// Errors produced by weight evaluation, sampling and the telegraph solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("q = {q} is a root of unity: (q;q)_{k} vanishes")]
    RootOfUnity { q: f64, k: usize },

    #[error("singular parameter: {0}")]
    SingularParameter(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameters are not stochastic: {0}")]
    NotStochastic(String),

    #[error("{what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("boundary data mismatch: {0}")]
    BoundaryMismatch(String),

    #[error("evaluation failed: {0}")]
    EvaluationFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value.is_nan() || value < min || value > max {
        return Err(Error::OutOfRange {
            what,
            value,
            min,
            max,
        });
    }
    Ok(())
}
