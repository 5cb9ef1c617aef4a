use thiserror::Error;

/// Errors raised by the simulator and its measurement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("grid too small: {0}")]
    Truncation(String),

    #[error("stepper validation failed: {0}")]
    Stepper(String),

    #[error("trajectory {index} aborted: {reason}")]
    TrajectoryAborted { index: usize, reason: String },

    #[error("{aborted} of {total} trajectories aborted (limit is 1%); first failure: {first}")]
    EnsembleAborted {
        aborted: usize,
        total: usize,
        first: String,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shot-noise calibration failed: {0}")]
    Calibration(String),

    #[error("unphysical measurement: {0}")]
    Unphysical(String),

    #[error("fit did not converge after {iterations} iterations (bracket [{lo:.6e}, {hi:.6e}])")]
    FitDiverged { iterations: usize, lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn io_err(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
    Error::Io {
        path: path.as_ref().display().to_string(),
        source,
    }
}
