use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solvers, optimizers and experiment pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is incompatible with its grid: {0}")]
    FieldMismatch(String),

    #[error("non-finite value at cell {cell}")]
    NonFinite { cell: usize },

    #[error("invalid resource budget: m0 = {m0}, kappa = {kappa} (need 0 < m0 < kappa)")]
    InfeasibleBudget { m0: f64, kappa: f64 },

    #[error("resource distribution violates preconditions: {0}")]
    NonPositiveResource(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("population collapsed toward extinction (principal eigenvalue {lambda1:.3e})")]
    ExtinctionDetected { lambda1: f64 },

    #[error("linearized operator is numerically singular (smallest pivot {pivot:.3e})")]
    SingularAdjoint { pivot: f64 },

    #[error("right-hand side not compatible with Neumann problem: mean {mean:.3e} exceeds {tol:.1e}")]
    GaugeViolation { mean: f64, tol: f64 },

    #[error("test function must have zero mean (mean = {mean:.3e})")]
    NonZeroMean { mean: f64 },

    #[error("sweep does not bracket an interior local maximum: {0}")]
    SweepTooCoarse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
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
