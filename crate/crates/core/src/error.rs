use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {what} at line {line}: {msg}")]
    Format { what: String, line: u64, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported sample rate {0} Hz (minimum 8000 Hz)")]
    UnsupportedRate(u32),

    #[error("infeasible removal plan: {0}")]
    InfeasiblePlan(String),

    #[error("infeasible split for dialect {dialect}: {speakers} speakers leave no training speaker")]
    InfeasibleSplit { dialect: String, speakers: usize },

    #[error("duplicate key {0}")]
    DuplicateKey(String),

    #[error("missing embedding for segment {0}")]
    MissingEmbedding(String),

    #[error("missing converted audio for recording {0}")]
    MissingConverted(String),

    #[error("training diverged at epoch {epoch}: loss {loss} (learning rate {lr} may be too high)")]
    Diverged { epoch: usize, loss: f64, lr: f64 },

    #[error("run {run_index} (seed {seed:#018x}) failed: {source}")]
    RunFailed {
        run_index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("wav error on {path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn csv(what: &str, err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        Error::Format { what: what.to_string(), line, msg: err.to_string() }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::UnsupportedRate(_) => "unsupported_rate",
            Error::InfeasiblePlan(_) => "infeasible_plan",
            Error::InfeasibleSplit { .. } => "infeasible_split",
            Error::DuplicateKey(_) => "duplicate_key",
            Error::MissingEmbedding(_) => "missing_embedding",
            Error::MissingConverted(_) => "missing_converted",
            Error::Diverged { .. } => "diverged",
            Error::RunFailed { .. } => "run_failed",
            Error::Wav { .. } => "wav",
        }
    }
}
