//! Error taxonomy shared by all modules.

use thiserror::Error;

/// Errors produced by measure construction and the experiment operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed data fed into a constructor (non-finite coordinates,
    /// out-of-range lattice coordinates, empty samples, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A parameter outside its documented domain (q <= 1, n = 0, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A computation would exceed the fixed desk-scale budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// A component measure was requested on a cell carrying no mass.
    #[error("empty component: {0}")]
    EmptyComponent(String),

    /// A restriction box carries no mass.
    #[error("empty restriction: {0}")]
    EmptyRestriction(String),

    /// Geometric validation failed (ping-pong violation, sample off the
    /// limit set, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// An iterative solver failed to converge or to bracket its target.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// An exact integer count does not fit in 63 bits.
    #[error("count overflow: {0}")]
    CountOverflow(String),

    /// The numerical hypothesis of a lemma-shaped search failed, so no
    /// qualifying output exists.
    #[error("lemma precondition violated: {0}")]
    LemmaPrecondition(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file did not parse as the format it claims to be.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI: 2 input, 3 budget, 4 convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Budget(_) | Error::CountOverflow(_) => 3,
            Error::Convergence(_) => 4,
            _ => 2,
        }
    }
}
