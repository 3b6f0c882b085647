use thiserror::Error;

/// Errors raised by the field, norm, model and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("rank mismatch: expected {expected} components, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("multiplier is singular at nonzero wavenumber {xi:?}")]
    SingularMultiplier { xi: [f64; 3] },

    #[error("dyadic block {block} outside resolvable range [{min}, {max}]")]
    BlockOutOfRange { block: i32, min: i32, max: i32 },

    #[error("invalid norm specification: {0}")]
    InvalidNormSpec(String),

    #[error("time samples must be strictly increasing")]
    UnsortedTimes,

    #[error("vacuum: minimum density {min_density:e} below floor {floor:e}")]
    Vacuum { min_density: f64, floor: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical abort at t = {time}: {reason}")]
    NumericalAbort { time: f64, reason: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
