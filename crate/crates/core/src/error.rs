use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit codes and run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Perception,
    Simulation,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    PlyHeader { path: PathBuf, line: usize, message: String },
    #[error("{path}: splat {index}: {message}")]
    PlyData { path: PathBuf, index: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("perception stage `{stage}` failed: {message}")]
    Perception { stage: String, message: String },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("binding failed for object {object_id}: {message}")]
    Binding { object_id: u32, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    pub fn perception(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Perception { stage: stage.into(), message: message.into() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::PlyHeader { .. } | Error::PlyData { .. } | Error::Validation { .. } => ErrorKind::Validation,
            Error::Perception { .. } => ErrorKind::Perception,
            Error::Simulation(_) | Error::Binding { .. } => ErrorKind::Simulation,
            Error::Io { .. } => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("driving set is empty")]
    EmptyDrivingSet,
    #[error("particle {index} at {position:?} lies outside the simulation domain")]
    OutOfDomain { index: usize, position: [f64; 3] },
    #[error("CFL guard violated by particle {index}: |v|*dt = {travel:e} >= dx = {dx:e}")]
    Cfl { index: usize, travel: f64, dx: f64 },
    #[error("particle {index} inverted: det(F) = {det:e}")]
    Inverted { index: usize, det: f64 },
    #[error("elastic constants: {0}")]
    Material(String),
}
