use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Curvature of the potential vanishes at the minimum, so the first-order
    /// shift formula has no finite value.
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    /// The time-step refinement did not settle within tolerance.
    #[error(
        "propagation did not converge: max coefficient change {max_change:.3e} \
         after refining dt to {final_dt:.3e} ns (tolerance {tolerance:.1e})"
    )]
    Accuracy {
        max_change: f64,
        final_dt: f64,
        tolerance: f64,
    },

    #[error("observation file line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}
