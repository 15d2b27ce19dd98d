use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation, estimation and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid configuration (grid alignment, bandwidth guard, schema).
    #[error("configuration error: {0}")]
    Config(String),

    /// Exact Gaussian sampling could not factor the covariance.
    #[error("generation error: covariance not positive definite (smallest eigenvalue {smallest_eigenvalue:e})")]
    Generation { smallest_eigenvalue: f64 },

    /// A non-finite value appeared while integrating.
    #[error("divergence error: non-finite value at t = {time}")]
    Divergence { time: f64 },

    /// A level or time outside the admissible window.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// An estimation time too close to the ends of the observation window.
    #[error("edge error: {0}")]
    Edge(String),

    /// Kernel construction failed.
    #[error("construction error: {0}")]
    Construction(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Short machine-readable tag used by the command-line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Generation { .. } => "generation",
            Error::Divergence { .. } => "divergence",
            Error::OutOfRange(_) => "out_of_range",
            Error::Edge(_) => "edge",
            Error::Construction(_) => "construction",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
