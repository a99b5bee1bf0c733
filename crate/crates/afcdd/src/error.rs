use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("frequency {value_hz} Hz is not aligned to the {grid_hz} Hz grid")]
    MisalignedFrequency { value_hz: f64, grid_hz: f64 },
    #[error("integration step {dt_s} s is too coarse; need dt <= {max_dt_s} s")]
    StepTooCoarse { dt_s: f64, max_dt_s: f64 },
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("{0} is unbounded for these parameters")]
    Unbounded(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
