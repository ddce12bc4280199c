use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported element type {element_type} at line {line}")]
    UnsupportedElement { line: usize, element_type: u32 },

    #[error("periodic pairing failed: {0}")]
    Pairing(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("assembly produced non-finite entries in cell {cell}")]
    Assembly { cell: usize },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual history {history:?})")]
    NonConvergence { iterations: usize, history: Vec<f64> },

    #[error("incremental loading stalled at load fraction {converged_fraction}: {reason}")]
    IncrementExhausted { converged_fraction: f64, reason: String },

    #[error("inadmissible kinematics: det F = {det}")]
    Kinematic { det: f64 },

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("tangent evaluation failed for component {component}: {reason}")]
    Tangent { component: String, reason: String },

    #[error("training diverged at epoch {epoch} (cost {cost})")]
    Training { epoch: usize, cost: f64 },

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("artifact error in {path}: {message}")]
    Artifact { path: PathBuf, message: String },

    #[error("run failed at t = {time}: {reason}")]
    Run { time: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Artifact {
            path: path.into(),
            message: message.into(),
        }
    }
}
