use alloc::boxed::Box;
use alloc::string::String;

use crate::transform::RigidTransform;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scan contains no clay-labeled points")]
    EmptyClay,

    #[error("base band holds {found} points, need at least 3 to outline a base")]
    NoBase { found: usize },

    #[error("registration found no non-degenerate hypothesis")]
    NoSolution,

    /// ICP lost every correspondence. `transform` is the last estimate before the stall.
    #[error("ICP stalled after {iterations} iterations: no correspondences within range")]
    Stall {
        transform: RigidTransform,
        iterations: usize,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("environment failure: {0}")]
    Environment(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the root cause is bad caller input rather than a runtime failure.
    pub fn is_invalid_input(&self) -> bool {
        match self {
            Error::InvalidInput(_) | Error::EmptyClay | Error::NoBase { .. } => true,
            Error::Stage { source, .. } => source.is_invalid_input(),
            _ => false,
        }
    }
}
