use std::path::PathBuf;

/// Errors produced by the solvers, the multi-fidelity pipeline and the I/O layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A physical quantity left its admissible range (negative density,
    /// non-finite potential, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure broke down (singular matrix, empty ensemble, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A fidelity model failed while evaluating a training or test sample.
    #[error("model `{model}` failed at sample {index} (z = {z:?}): {source}")]
    Model {
        model: String,
        index: usize,
        z: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    /// Configuration text was malformed or violated the schema.
    #[error("config error{}: {message}", fmt_location(.key, .line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },

    /// An experiment stage failed; `stage` names it.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

fn fmt_location(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" at line {l} (key `{k}`)"),
        (Some(k), None) => format!(" (key `{k}`)"),
        (None, Some(l)) => format!(" at line {l}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.into()),
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
