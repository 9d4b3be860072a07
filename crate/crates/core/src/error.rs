use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    Schema(String),

    /// A row breaks the presence pattern required by the observability mode.
    #[error("row {row}: {rule}")]
    Presence { row: usize, rule: String },

    #[error("row {row}, column `{column}`: cannot parse {value:?} ({reason})")]
    Parse {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("empty stratum: {0}")]
    EmptyStratum(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("positivity violation: {0}")]
    Positivity(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{failed} of {total} replicates failed (limit 5%); first failure: {first}")]
    Replicates {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed input data or configuration, as
    /// opposed to failures of the estimation itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Presence { .. }
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::InvalidInput(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
