use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: unsupported schema version {found} (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("io error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// Every machine was discarded by pre-processing.
    #[error("guess too small: all machines discarded at alpha = {alpha}")]
    GuessTooSmall { alpha: f64 },

    #[error("stalled step on job {job}: coverage did not increase")]
    StalledStep { job: usize },

    #[error("job {job}: step cap of {cap} exceeded (coverage {coverage})\n{dump}")]
    StepCapExceeded {
        job: usize,
        cap: u64,
        coverage: f64,
        dump: String,
    },

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("branch and bound exhausted its budget of {nodes} nodes without a feasible schedule")]
    NodeBudgetExhausted { nodes: u64 },

    #[error("instance too large for exhaustive search: m^n = {size:e} > {limit:e}")]
    TooLarge { size: f64, limit: f64 },

    #[error("doubling aborted: guess {guess} passed total machine cost {total_cost}; bound constant C = {bound_constant} is too small for this instance")]
    DoublingAborted {
        guess: f64,
        total_cost: f64,
        bound_constant: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
