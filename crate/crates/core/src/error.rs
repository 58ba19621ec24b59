use thiserror::Error;

/// Errors raised by the simulator and its analytical helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too small: {cells_per_side} cells per side cannot hold a {cluster_side}x{cluster_side} cluster")]
    GridTooSmall {
        cells_per_side: usize,
        cluster_side: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated ({hypothesis}): {detail}")]
    Precondition {
        hypothesis: &'static str,
        detail: String,
    },

    #[error("series diverges for alpha = {0} (requires alpha > 2)")]
    Divergent(f64),

    #[error("zero distance between transmitter and receiver")]
    ZeroDistance,

    #[error("cell {0:?} holds no candidate relay")]
    EmptyCell((usize, usize)),

    #[error("queue unstable: arrival probability {p} >= service probability {q}")]
    Unstable { p: f64, q: f64 },

    #[error("horizon of {0} steps too short for the separation to reach 1/e")]
    TauNotReached(usize),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
