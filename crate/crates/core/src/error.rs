use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("point {index} ({x}, {y}) lies outside the window")]
    PointOutsideWindow { index: usize, x: f64, y: f64 },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("duplicate point at index {index} (same coordinates as index {first})")]
    DuplicatePoint { index: usize, first: usize },
    #[error("triangle vertices coincide")]
    CoincidentPoints,
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid statistic: {0}")]
    InvalidStatistic(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero-variance null: the calibration is degenerate")]
    DegenerateCalibration,
    #[error("window mismatch: pattern window {pattern:?} differs from calibration window {calibration:?}")]
    WindowMismatch {
        pattern: [f64; 4],
        calibration: [f64; 4],
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("need at least {need} curves, got {got}")]
    TooFewCurves { need: usize, got: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
