use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The evolution produced non-finite or runaway values. `t_last` is the
    /// last time level at which the field was still finite and bounded.
    #[error("blow-up detected after t = {t_last}")]
    BlowUp { t_last: f64 },

    #[error("state left the modulation tube: {0}")]
    OutOfTube(String),

    #[error("ill-conditioned configuration: {0}")]
    IllConditioned(String),

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("adaptive step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
