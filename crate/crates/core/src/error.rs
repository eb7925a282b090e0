use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("validation failed ({invariant}): {detail}")]
    Validation { invariant: &'static str, detail: String },
    #[error("unsupported prime {0}: divides the index of every tried generator")]
    UnsupportedPrime(u64),
    #[error("search exhausted for {what} at bound {bound}")]
    SearchBound { what: String, bound: i64 },
    #[error("budget exceeded for {what}: need {needed:e}, cap {cap:e}")]
    Budget { what: String, needed: f64, cap: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn validation(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation { invariant, detail: detail.into() }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
