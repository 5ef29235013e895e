use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("incompatible states: {0}")]
    IncompatibleStates(String),

    #[error("dense representation too large: {required} amplitudes exceeds the cap of {cap}")]
    TooLarge { required: u128, cap: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("all filter weights vanish: no eigenvalue lies inside the window around E = {energy}")]
    DegenerateWindow { energy: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("every one of the {0} samples failed")]
    RunFailed(usize),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
