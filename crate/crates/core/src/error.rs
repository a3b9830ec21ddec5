//! Error and result types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
///
/// Errors fall into two broad families: *input* errors (malformed models,
/// unknown identifiers, inconsistent request shapes) and *numerical guard*
/// errors (singular resolvents, saturated Fock cutoffs, exceeded term-count
/// guards). The CLI maps the former to exit code 2 and the latter to exit
/// code 3; see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("model validation failed at {path}: {message}")]
    ModelValidation { path: String, message: String },
    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },
    #[error("model JSON parse error: {0}")]
    Json(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("photon order {order} exceeds the supported limit {limit}")]
    OrderTooLarge { order: usize, limit: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(
        "resolvent numerically singular at excitation block n={n}, omega={omega}: \
         reciprocal condition estimate {rcond:.3e}"
    )]
    SingularResolvent { n: usize, omega: f64, rcond: f64 },
    #[error("term count {terms} exceeds the configured guard {guard}")]
    TermGuardExceeded { terms: u128, guard: u64 },
    #[error("all drive frequencies must be equal for a stationary transmission")]
    UnequalDriveFrequencies,
    #[error("invalid channel combination: {0}")]
    InvalidChannelCombination(String),
    #[error(
        "Fock cutoff too small: population {population:.3e} at the truncation \
         boundary exceeds {limit:.1e}"
    )]
    CutoffSaturated { population: f64, limit: f64 },
    #[error("steady-state solve failed: {0}")]
    SteadyState(String),
    #[error("steady state is not unique (null-space dimension {dim})")]
    DegenerateSteadyState { dim: usize },
    #[error("time integration failed: {0}")]
    Integration(String),
    #[error("correlator denominator {value:.3e} is below the defined threshold")]
    DenominatorBelowThreshold { value: f64 },
    #[error("linear algebra backend error: {0}")]
    Linalg(String),
    #[error("sweep specification invalid: {0}")]
    SweepSpec(String),
    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    /// Classify the error for a process exit status: `2` for input/validation
    /// errors, `3` for numerical guards tripped during a computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ModelValidation { .. }
            | Error::UnknownId { .. }
            | Error::Json(_)
            | Error::Io(_)
            | Error::OrderTooLarge { .. }
            | Error::DimensionMismatch(_)
            | Error::UnequalDriveFrequencies
            | Error::InvalidChannelCombination(_)
            | Error::SweepSpec(_)
            | Error::InvalidArgument(_) => 2,
            Error::SingularResolvent { .. }
            | Error::TermGuardExceeded { .. }
            | Error::CutoffSaturated { .. }
            | Error::SteadyState(_)
            | Error::DegenerateSteadyState { .. }
            | Error::Integration(_)
            | Error::DenominatorBelowThreshold { .. }
            | Error::Linalg(_) => 3,
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
