use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point ({x}, {y}) lies outside the mesh")]
    OutOfDomain { x: f64, y: f64 },

    #[error("potential value {value} at ({x}, {y}) is negative or not finite")]
    InvalidPotential { x: f64, y: f64, value: f64 },

    #[error("function value {value} at ({x}, {y}) is not finite")]
    InvalidFunction { x: f64, y: f64, value: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("refinement map does not match the spaces: {0}")]
    InvalidMap(String),

    #[error("iterate vanishes after projection onto the complement of the known states")]
    DegenerateIterate,

    #[error("constraint {index} has vanishing L2 norm after projection")]
    DegenerateConstraint { index: usize },

    #[error("no time step in the backtracking range decreases the energy")]
    Stagnation,

    #[error("patch has no interior nodes")]
    EmptyLocalSpace,

    #[error("gradient flow exceeded {steps} steps on mesh level {level}")]
    CapExceeded { level: usize, steps: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
