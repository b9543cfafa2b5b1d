use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("endpoint {node} out of range for a graph with n={n}")]
    EndpointOutOfRange { node: usize, n: usize },

    #[error("{0}: empty input")]
    Empty(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate operator at layer {layer}: capacity undefined")]
    DegenerateOperator { layer: usize },

    #[error("retention ratio undefined at layer {layer}: cumulative entropy {value} is not positive")]
    RetentionUndefined { layer: usize, value: f64 },

    #[error("degenerate constant matrix: {0}")]
    DegenerateMatrix(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("sparsification removed every entry of the operator")]
    EmptyOperator,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the mathematics (as opposed to bad input).
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateOperator { .. }
                | Error::RetentionUndefined { .. }
                | Error::DegenerateMatrix(_)
                | Error::Overflow(_)
                | Error::EmptyOperator
        )
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> u8 {
        if self.is_degenerate() {
            3
        } else {
            2
        }
    }
}
