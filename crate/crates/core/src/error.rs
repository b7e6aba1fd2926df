use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EdmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EdmError {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular parameter: {0} must be non-zero")]
    SingularParameter(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no steady state with rotor angle in (0, {delta_max:.6}] rad: {reason}")]
    InfeasibleSteadyState { delta_max: f64, reason: String },

    #[error("infeasible initialization: {0}")]
    InfeasibleInit(String),

    #[error("simulation diverged at sample {index}")]
    Diverged { index: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dataset too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class reported by the command-line front end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Parse,
    Infeasible,
    Diverged,
    SolverFailure,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Io => "io",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Infeasible => "infeasible",
            ErrorCategory::Diverged => "diverged",
            ErrorCategory::SolverFailure => "solver-failure",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Io => 2,
            ErrorCategory::Parse => 3,
            ErrorCategory::Infeasible => 4,
            ErrorCategory::Diverged => 5,
            ErrorCategory::SolverFailure => 6,
        }
    }
}

impl EdmError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            EdmError::Io { .. } => ErrorCategory::Io,
            EdmError::Parse { .. }
            | EdmError::Config(_)
            | EdmError::TooShort { .. }
            | EdmError::LengthMismatch { .. }
            | EdmError::NonFinite { .. } => ErrorCategory::Parse,
            EdmError::InvalidParameter(_)
            | EdmError::SingularParameter(_)
            | EdmError::Domain(_)
            | EdmError::InfeasibleSteadyState { .. }
            | EdmError::InfeasibleInit(_) => ErrorCategory::Infeasible,
            EdmError::Diverged { .. } => ErrorCategory::Diverged,
            EdmError::Solver(_) => ErrorCategory::SolverFailure,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EdmError::Io {
            path: path.into(),
            source,
        }
    }
}
