use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid must have at least 16 points and an even count, got {0}")]
    InvalidGrid(usize),

    #[error("field length mismatch: expected {expected}, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("degenerate frequencies: discriminant s^2 + 4(c^2 - s*delta) = {discriminant} is not positive")]
    DegenerateFrequencies { discriminant: f64 },

    #[error("initial data has zero energy")]
    ZeroEnergy,

    #[error("mode k = {k} aliases on a grid of {n} points (need |k| < n/2)")]
    AliasedMode { k: i64, n: usize },

    #[error("tan-form evaluation at t = {t} is within 1e-6 of a pole")]
    TanPole { t: f64 },

    #[error("map is not monotone at index {index}: {left} > {right}")]
    NonMonotone { index: usize, left: f64, right: f64 },

    #[error("errors are at the round-off floor; no convergence order can be measured")]
    InsufficientDecay,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
