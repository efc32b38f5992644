use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid phase model: {0}")]
    InvalidModel(String),

    #[error("invalid boundary data: {0}")]
    InvalidBoundary(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolver(String),

    #[error("field has {found} values, expected {expected} for n = {n}")]
    ShapeMismatch { n: usize, expected: usize, found: usize },

    #[error("non-finite value at node ({i}, {j}) after step {step}")]
    NonFinite { i: usize, j: usize, step: usize },

    #[error("linear solve did not reach tolerance {tol:e} after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64, tol: f64 },

    #[error("no terminal point of the free boundary lies on the Neumann boundary")]
    NoNeumannTerminal,

    #[error("diagnostic precondition failed: {0}")]
    Diagnostic(String),

    #[error("experiment: {0}")]
    Experiment(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
