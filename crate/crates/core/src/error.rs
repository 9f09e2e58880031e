use std::path::PathBuf;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {file} at line {line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error("nonpositive edge length at line {line}")]
    NonPositiveLength { line: usize },
    #[error("edge at line {line} references unknown node {node}")]
    DanglingEdge { line: usize, node: u64 },
    #[error("duplicate node id {0}")]
    DuplicateNode(u64),
    #[error("duplicate poi id {0}")]
    DuplicatePoi(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("series too short: need more than {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("timestamp {0} outside holiday calendar coverage")]
    OutsideCalendar(String),
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("arima objective diverged after {iters} iterations")]
    Diverged { iters: usize, last: Box<crate::arima::ArimaModel> },
    #[error("graph hash mismatch: checkpoint {expected}, graph {actual}")]
    GraphHashMismatch { expected: String, actual: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { file: file.into(), line, msg: msg.into() }
    }

    /// Short machine-readable classification, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } | Error::NonPositiveLength { .. } | Error::DanglingEdge { .. } => {
                "schema"
            }
            Error::DuplicateNode(_) | Error::DuplicatePoi(_) => "schema",
            Error::Shape(_) => "shape",
            Error::Invalid(_) | Error::TooShort { .. } | Error::OutsideCalendar(_) => "invalid",
            Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. } | Error::Diverged { .. } => {
                "numeric"
            }
            Error::GraphHashMismatch { .. } => "hash_mismatch",
            Error::Checkpoint(_) => "checkpoint",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
