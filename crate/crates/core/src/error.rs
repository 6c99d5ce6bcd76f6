use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter a must differ from 1 (fixed-point elimination divides by a - 1)")]
    UnitRecoveryRate,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("orbit diverged at step {step}")]
    Diverged { step: usize },

    #[error("trajectory tail has {len} states, need at least {needed}")]
    TailTooShort { len: usize, needed: usize },

    #[error("Lyapunov frame degenerated at step {step}")]
    DegenerateFrame { step: usize },

    #[error("continuation failed: {0}")]
    Continuation(String),

    #[error("parameter `{0}` does not belong to the single-neuron map")]
    NotAMapParameter(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
