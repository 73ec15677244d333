use thiserror::Error;

/// Errors raised across simulation, solving and verification.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A coefficient is singular (or undefined) at the given state.
    #[error("singular coefficient for {system} at state {state:?}")]
    Singularity { system: String, state: Vec<f64> },

    /// Integration stopped at a step that no safeguard could repair.
    #[error("integration failed on path {path} at step {step}: {reason}")]
    Integration {
        path: u64,
        step: usize,
        reason: String,
    },

    /// A mollification width too narrow for the grid.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Explicit time step above the stability limit.
    #[error("stability bound violated: dt = {dt:e} > {bound:e} (min(h^2)/(4 max D))")]
    Stability { dt: f64, bound: f64 },

    /// The discrete solution left the admissible set of values.
    #[error("scheme failure: {0}")]
    SchemeFailure(String),

    /// Mass lost through an absorbing wall above tolerance.
    #[error("boundary leakage {leakage:e} exceeds tolerance {tolerance:e}")]
    Leakage { leakage: f64, tolerance: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Expected bin count below the chi-square validity limit.
    #[error("bin underflow: expected count {expected} per bin is below 5")]
    BinUnderflow { expected: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
