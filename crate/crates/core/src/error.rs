use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed data, model spec, or parameters.
    Input,
    /// Non-convergence, divergence, singular systems.
    Numerical,
    /// Filesystem failures.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("header column {column}: {message}")]
    BadHeader { column: usize, message: String },

    #[error("dataset has no usable rows: {0}")]
    EmptyDataset(String),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("model spec error at line {line}, column {column}: {message}")]
    SpecSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("model spec: {0}")]
    Spec(String),

    #[error("structural model contains a cycle: {0}")]
    Cycle(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("PLS did not converge within {iterations} iterations (last change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("singular system while estimating `{0}` (perfect collinearity)")]
    Singular(String),

    #[error("training diverged (non-finite loss at epoch {epoch}); try a lower learning rate")]
    Divergence { epoch: usize },

    #[error("{0}")]
    Numerical(String),

    #[error("bootstrap unstable: {failed} of {reps} replications failed")]
    UnstableBootstrap { failed: usize, reps: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::NonConvergence { .. }
            | Error::Singular(_)
            | Error::Divergence { .. }
            | Error::Numerical(_)
            | Error::UnstableBootstrap { .. } => ErrorKind::Numerical,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Input,
        }
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
