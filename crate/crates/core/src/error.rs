use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit index {index} out of range for {n} units")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("self-loop on unit {0}")]
    SelfLoop(usize),

    #[error("adjacency graph is disconnected ({components} components); every unit must be reachable")]
    DisconnectedGraph { components: usize },

    #[error("duplicate point coordinates at units {0} and {1}")]
    DuplicatePoints(usize, usize),

    #[error("graph must contain at least one unit")]
    EmptyGraph,

    #[error("subset must be non-empty")]
    EmptySubset,

    #[error("region {region} does not exist (partition has {regions} regions)")]
    UnknownRegion { region: usize, regions: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("size mismatch: {what} has {got} entries, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("too few observations: {got} members, need at least {needed}")]
    TooFewObservations { got: usize, needed: usize },

    #[error("covariate vector has length {got}, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("initial partition failed: no growth with {count} regions of at least {min_obs} units after {attempts} attempts")]
    InitializationFailed {
        count: usize,
        min_obs: usize,
        attempts: usize,
    },

    #[error("merge stage left {regions} regions after enforcing min_obs={min_obs}, fewer than p={p}; increase K or lower min_obs")]
    MergeInfeasible {
        regions: usize,
        p: usize,
        min_obs: usize,
    },

    #[error("could not draw a valid region scheme after {attempts} attempts: {reason}")]
    SchemeInfeasible { attempts: usize, reason: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by a well-formed request that the solver or
    /// generator could not satisfy, as opposed to malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InitializationFailed { .. }
                | Error::MergeInfeasible { .. }
                | Error::SchemeInfeasible { .. }
        )
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        if self.is_infeasible() {
            3
        } else {
            2
        }
    }
}
