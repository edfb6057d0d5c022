use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid norm spec: {0}")]
    InvalidSpec(String),

    #[error("boundary atlas needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("point ({x}, {y}) is not on the unit sphere (|gauge - 1| = {defect:.3e})")]
    NotOnBoundary { x: f64, y: f64, defect: f64 },

    #[error("operation requires a C1 strictly convex norm: {0}")]
    NotSmooth(String),

    #[error("evaluation at the singular point")]
    SingularPoint,

    #[error("degenerate modulus: only {positive} positive values in range (need 8)")]
    DegenerateModulus { positive: usize },

    #[error("window {window} exceeds half of the boundary")]
    WindowTooLarge { window: f64 },

    #[error("too few usable pairs: {got} (need {min})")]
    TooFewPairs { got: usize, min: usize },

    #[error("invalid field grid: {0}")]
    InvalidGrid(String),

    #[error("no test function fits inside the mask")]
    NoTestFunction,

    #[error("rectangle leaves the domain: {0}")]
    OutsideDomain(String),

    #[error("need at least {min} lines, got {got}")]
    TooFewLines { got: usize, min: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
