//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time {0} is not on the grid")]
    OffGrid(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("covariance is distributional")]
    WhiteCovariance,

    #[error("shear only supported analytically for smooth noise")]
    WhiteShear,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("positivity lost; refine dt")]
    PositivityLost,

    #[error("dt {dt} above positivity bound; admissible dt <= {max_dt}")]
    StepTooLarge { dt: f64, max_dt: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("nonpositive gap in rate fit")]
    NonPositiveGap,

    #[error("ensemble too small: {got} < {min}")]
    EnsembleTooSmall { got: usize, min: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
