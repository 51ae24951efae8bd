use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by dataset handling, solvers and trainers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("degenerate group: {0}")]
    DegenerateGroup(String),

    #[error("split produced a part with a single protected group; choose a different seed or fraction ({0})")]
    DegenerateSplit(String),

    #[error("linear system is rank-deficient beyond ridge rescue (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("optimizer did not converge after {iters} iterations (last parameter change {last_change:.3e})")]
    NonConvergence { iters: usize, last_change: f64 },

    #[error("loss became non-finite during {context} at iteration {iteration}")]
    NonFiniteLoss { context: String, iteration: usize },

    #[error("{phase} phase: {source}")]
    TrainingPhase {
        phase: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid structural model: {0}")]
    InvalidScm(String),

    #[error("balancing-score value {0} is not attained by any support point")]
    UnattainedLevel(f64),

    #[error("all-zero hessian passed to the booster")]
    ZeroHessian,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_phase(self, phase: impl Into<String>) -> Self {
        Error::TrainingPhase {
            phase: phase.into(),
            source: Box::new(self),
        }
    }
}
