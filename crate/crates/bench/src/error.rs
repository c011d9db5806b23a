//! Harness errors and their process exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Unknown preset or integrator, malformed config, or an invalid combination.
    #[error("config error: {0}")]
    Config(String),

    /// An integrator failed part-way through a run.
    #[error("{integrator} failed at h = {h}")]
    Step {
        integrator: String,
        h: f64,
        #[source]
        source: svi::Error,
    },

    /// The oracle does not cover the trajectory's time window.
    #[error("window error: {0}")]
    Window(String),

    /// Too few points above the floor to fit a slope.
    #[error("insufficient data: {0} usable points, need at least 3")]
    InsufficientData(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl BenchError {
    /// Process exit code: 2 for configuration errors, 3 for integration failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Step { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.display().to_string(), source }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
