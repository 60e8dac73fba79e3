use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("history underflow: requested t = {t_query}, earliest stored sample is t = {earliest}")]
    HistoryUnderflow { t_query: f64, earliest: f64 },

    #[error("history lookahead: requested t = {t_query}, latest stored sample is t = {latest}")]
    HistoryAhead { t_query: f64, latest: f64 },

    #[error("horizon overflow: exponent {exponent} exceeds the double-precision limit of {limit}")]
    HorizonOverflow { exponent: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical blowup at t = {t}: {detail}")]
    NumericalBlowup { t: f64, detail: String },

    #[error("singular tridiagonal system at row {row} (pivot {pivot})")]
    SingularSolve { row: usize, pivot: f64 },

    #[error("insufficient data: found {found} peaks, need at least {needed}")]
    InsufficientData { found: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
