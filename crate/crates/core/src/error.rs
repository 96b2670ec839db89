use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("learning rates are not proportional: {0}")]
    NonProportional(String),
    #[error("zero-norm feature in column {0}")]
    ZeroFeature(usize),
    #[error("kernel is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("limit direction not E1-dominated: gamma = {gamma} must lie in (0, {bound}) for C = {classes}")]
    NotE1Dominated {
        gamma: f64,
        bound: f64,
        classes: usize,
    },
    #[error("rate fit needs at least 10 points in the window, got {0}")]
    TooFewPoints(usize),
    #[error("non-positive value {value:e} at t = {time} inside the fit window")]
    NonPositive { time: f64, value: f64 },
    #[error("zero-norm input to a normalized distance")]
    ZeroNorm,
}

pub type Result<T> = std::result::Result<T, Error>;
