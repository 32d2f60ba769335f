use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain an operation accepts.
    #[error("input domain: {0}")]
    Domain(String),

    /// Load cannot be met within the aggregate bounds. `gap` is positive for a
    /// supply deficit (load above total upper bound) and negative for a surplus
    /// (load below total lower bound).
    #[error("infeasible dispatch: load {load} kW outside [{lower}, {upper}] kW (gap {gap} kW)")]
    Infeasible {
        load: f64,
        lower: f64,
        upper: f64,
        gap: f64,
    },

    #[error("no feasible commitment combination for load {load} kW")]
    NoFeasibleCommitment { load: f64 },

    #[error("horizon infeasible at timestep {step}: {source}")]
    Horizon {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dataset generation failed at timestep {step}: {source}")]
    Generation {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    /// `epoch` counts from 1.
    Diverged { epoch: usize, loss: f64 },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("missing metadata sidecar {0}")]
    MissingMetadata(PathBuf),

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
