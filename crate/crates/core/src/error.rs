use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("cannot normalize a constant grid")]
    DegenerateNormalization,

    #[error("parse error at byte {offset}: {detail}")]
    Parse { offset: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{mode} iteration diverged with dt={dt} at iteration {iteration} (update norm {update_norm:e})")]
    Divergence {
        mode: &'static str,
        dt: f64,
        iteration: usize,
        update_norm: f64,
    },

    #[error("fit failed on every start (best residual {best_residual:e}): {detail}")]
    FitFailure { best_residual: f64, detail: String },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    TrainingDiverged { epoch: usize, batch: usize, loss: f64 },
}

impl Error {
    /// Short machine-readable tag, used by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Argument(_) => "argument",
            Error::NonFinite { .. } => "non-finite",
            Error::UndefinedCorrelation(_) => "undefined-correlation",
            Error::DegenerateNormalization => "degenerate-normalization",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Divergence { .. } => "divergence",
            Error::FitFailure { .. } => "fit-failure",
            Error::TrainingDiverged { .. } => "training-diverged",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(offset: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            detail: detail.into(),
        }
    }
}
