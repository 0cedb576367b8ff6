use thiserror::Error;

/// Errors raised by the synthesis and verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("mode index {j} outside 1..={j_max}")]
    ModeOutOfRange { j: usize, j_max: usize },

    #[error("table lookup ({i}, {j}) outside computed range i<={i_max}, j<={j_max}")]
    TableOutOfRange {
        i: usize,
        j: usize,
        i_max: usize,
        j_max: usize,
    },

    #[error("power series did not converge below degree {0}")]
    SeriesNotConverged(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("evaluation point {t} below the smoothing threshold {t_min}")]
    BeforeSmoothing { t: f64, t_min: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("incompatible target: {0}")]
    Incompatible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
