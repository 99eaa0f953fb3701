use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A voxel with no neighbours where the CAR conditional needs some.
    #[error("voxel {voxel} has no neighbours; the CAR conditional is undefined there")]
    DegenerateVoxel { voxel: usize },

    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// Non-finite value produced while evaluating a density.
    #[error("numerical overflow in {component}")]
    NumericalOverflow { component: &'static str },

    /// A matrix that must be symmetric positive definite is not.
    #[error("{what} is not positive definite (condition estimate {condition:e})")]
    NotPositiveDefinite { what: &'static str, condition: f64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// Simulation instance did not satisfy its invariants after all retries.
    #[error("simulation failed after {attempts} attempts: {reason}")]
    Simulation { attempts: u32, reason: String },
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
