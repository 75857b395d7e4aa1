use std::path::Path;

use thiserror::Error;

/// Errors surfaced by the command-line harness, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration values (exit 2).
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Anything that went wrong while doing the work (exit 1).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

macro_rules! runtime_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        })*
    };
}

runtime_from!(
    bnn_verify::bayes::BayesError,
    bnn_verify::nn::NnError,
    bnn_verify::sim::SimError,
    bnn_verify::statcheck::StatError,
    bnn_verify::uncertainty::UncertaintyError,
    csv::Error,
    serde_json::Error
);
