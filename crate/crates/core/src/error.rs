use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point is not in the ambient point list of the finite backend")]
    UnknownPoint,

    #[error("fiber over base index {0} is empty")]
    EmptyFiber(usize),

    #[error("base index {index} out of range (sample has {len} points)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("zero fiber distance between section value at {from} and the fiber over {to}")]
    DegenerateFibers { from: usize, to: usize },

    #[error("operation requires the affine-graph fiber backend")]
    UnsupportedBackend,

    #[error("time must be positive and finite, got {0}")]
    InvalidTime(f64),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid sample set: {0}")]
    InvalidSample(String),

    #[error("invalid section: {0}")]
    InvalidSection(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("cell (t = {t}, y = {y}): {source}")]
    Cell {
        t: f64,
        y: usize,
        #[source]
        source: Box<Error>,
    },
}
