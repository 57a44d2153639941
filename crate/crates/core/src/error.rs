use thiserror::Error;

/// Errors raised by the environment, the policies and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown descriptor: {0}")]
    UnknownSpec(String),

    #[error("round {got} visited out of order (expected {expected})")]
    OutOfOrder { expected: usize, got: usize },

    #[error("feedback for round {0} is not outstanding")]
    UnknownArrival(usize),

    #[error("duplicate feedback for round {0}")]
    DuplicateArrival(usize),

    #[error("played arm {arm} has zero probability")]
    ZeroProbability { arm: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("step size at round {round} is invalid: {value} (previous {previous})")]
    InvalidStepSize {
        round: usize,
        value: f64,
        previous: f64,
    },

    #[error("delay for round {0} must be supplied in known-delay mode")]
    MissingDelay(usize),

    #[error("trace is incomplete: {0}")]
    IncompleteTrace(String),

    #[error("missing bound parameter: {0}")]
    MissingParameter(&'static str),

    #[error("empty input")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, Error>;
