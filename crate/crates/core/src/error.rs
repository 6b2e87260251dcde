use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at {location}")]
    NonFinite { location: String, value: f64 },

    #[error("under-resolved {what}: width {width} must be at least {required} (dx = {dx})")]
    Resolution {
        what: &'static str,
        width: f64,
        required: f64,
        dx: f64,
    },

    #[error("point x = {x} is outside the admissible range [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("jacobian {jacobian} <= 0 for node {node} at t = {time}; reduce the time step")]
    StepSize { node: usize, time: f64, jacobian: f64 },

    #[error("flow lost monotonicity between nodes {node} and {next} at t = {time}")]
    NonMonotone { node: usize, next: usize, time: f64 },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("time grids are not nested: {0}")]
    NonNested(String),

    #[error("incompatible inputs: {0}")]
    Mismatch(String),
}
