use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("degenerate state: every measurement outcome is below the probability threshold")]
    DegenerateState,

    #[error("no thermalization: entanglement velocity is zero for d_B1 = 1")]
    NoThermalization,

    #[error("ill-conditioned ratio: Delta^(1) = {delta1:.3e} is within 10x its standard error {stderr:.3e}")]
    IllConditionedRatio { delta1: f64, stderr: f64 },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("{failed} of {total} realizations failed (more than 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for usage problems, 3 for resource
    /// problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::InvalidDimension(_) => 2,
            Error::Resource(_) => 3,
            _ => 1,
        }
    }
}
