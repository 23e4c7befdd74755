use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Rejections raised while validating a configuration document.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed config document: {0}")]
    Parse(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("non-finite value for `{0}`")]
    NonFinite(String),
    #[error("nonpositive time step (`domain.dt` = {0})")]
    NonPositiveTimeStep(f64),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("CFL violation for `domain.dt`: Courant number {courant} exceeds 1")]
    Cfl { courant: f64 },
}

impl ConfigError {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// Config key the rejection refers to, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::MissingKey(k) | ConfigError::UnknownKey(k) | ConfigError::NonFinite(k) => {
                Some(k)
            }
            ConfigError::Invalid { key, .. } => Some(key),
            ConfigError::NonPositiveTimeStep(_) | ConfigError::Cfl { .. } => Some("domain.dt"),
            ConfigError::Parse(_) => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite value in {field} at cell {cell:?}")]
    NonFinite { field: String, cell: Vec<usize> },
    #[error("CFL violation: max local Courant number {courant}")]
    Cfl { courant: f64 },
    #[error(
        "linear solver stopped after {iterations} iterations with relative residual {residual:e}"
    )]
    SolverCap { iterations: usize, residual: f64 },
    #[error("initial support reaches the box boundary: {0}")]
    SupportAtBoundary(String),
    #[error("step {step}: non-finite diagnostic `{name}`")]
    NanAbort { step: usize, name: String },
    #[error(
        "finite-difference step too small: differences {difference:e} below noise floor {floor:e}"
    )]
    ProbeConditioning { difference: f64, floor: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
