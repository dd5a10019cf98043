use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0} (only 1 and 2 are supported)")]
    UnsupportedDimension(usize),

    #[error("invalid grid size {0}: need an even node count of at least 8")]
    InvalidGridSize(usize),

    #[error("field does not live on the expected grid")]
    GridMismatch,

    #[error("time grids do not match")]
    TimeGridMismatch,

    #[error("density is not normalized: mass {mass}, min value {min}")]
    NotNormalized { mass: f64, min: f64 },

    #[error("non-finite value in field")]
    NonFinite,

    #[error("field must be strictly positive (node {index} has value {value})")]
    NonPositive { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("clipped negative mass {clipped} exceeds the allowed 1e-10")]
    ExcessiveClipping { clipped: f64 },

    #[error("{what} did not converge after {iterations} iterations (last gap {gap:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("linear program failed: {0}")]
    LinearProgram(String),
}

pub type Result<T> = std::result::Result<T, Error>;
