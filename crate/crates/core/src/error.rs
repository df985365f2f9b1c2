use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The covariance statistics contradict each other (not positive semidefinite).
    #[error("inconsistent statistics: {0}")]
    InconsistentStatistics(String),

    /// Input violates a physical constraint (e.g. the vacuum uncertainty bound).
    #[error("unphysical input: {0}")]
    Unphysical(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Samples are too degenerate for a nearest-neighbor estimate.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// An exact computation would exceed the enumeration budget.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the `cvqkd` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Configuration(_) => 3,
            Error::Parse(_) => 4,
            Error::Capacity(_) => 5,
            Error::VerificationFailed(_) => 6,
            Error::Io(_) => 7,
            Error::Domain(_)
            | Error::InconsistentStatistics(_)
            | Error::Unphysical(_)
            | Error::InsufficientData { .. }
            | Error::DegenerateData(_) => 8,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
