//! Error type shared by every module.

use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration line or command-line option could not be parsed.
    /// Line 0 refers to the command line.
    #[error("{}key `{key}`: {message}", line_prefix(*line))]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    /// A rate evaluation failed for a specific protocol and distance.
    #[error("{protocol} at {distance_km} km: {source}")]
    Evaluation {
        protocol: String,
        distance_km: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Reading or writing a named file failed.
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn line_prefix(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!("line {line}: ")
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
