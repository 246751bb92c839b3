use thiserror::Error;

/// Errors raised by the inference and prediction engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("cell ({x}, {y}) is outside the {width}x{height} map")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("cell ({x}, {y}) is blocked")]
    Blocked { x: usize, y: usize },

    #[error("cells {from:?} and {to:?} are not adjacent")]
    NotAdjacent { from: (usize, usize), to: (usize, usize) },

    /// An observation skipped over one or more grid steps.
    #[error("observation gap: {to:?} is not a successor of {from:?}")]
    ObservationGap { from: (usize, usize), to: (usize, usize) },

    #[error("model error: {0}")]
    Model(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
