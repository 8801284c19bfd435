use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or parameters that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed numeric input (distributions, metrics, indices).
    #[error("invalid input: {0}")]
    Input(String),

    /// An iterative solver hit its iteration cap.
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    /// Gradient descent produced a non-finite loss.
    #[error("descent diverged at step {step} (loss {loss}); try a smaller step size")]
    Diverged { step: usize, loss: f64 },

    /// A model was queried on cells it has never seen and has no fallback for.
    #[error("model has no data for cells {0:?}")]
    MissingCells(Vec<(usize, usize)>),

    /// Q-values blew past the divergence guard during training.
    #[error("Q-values diverged at step {step}: max |q| = {max_abs_q:e}")]
    QDivergence { step: usize, max_abs_q: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    TomlWrite(#[from] toml::ser::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
