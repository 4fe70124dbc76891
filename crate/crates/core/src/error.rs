use thiserror::Error;

/// Errors produced by the library.
///
/// Each variant maps onto one of the command-line exit classes through
/// [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension d={0}: must be at least 2")]
    InvalidDimension(usize),

    #[error("invalid party count N={0}: must be at least 1")]
    InvalidParties(usize),

    #[error("expected {expected} phase components, got {got}")]
    ComponentCount { expected: usize, got: usize },

    #[error("outcome {m} out of range for d={d}")]
    OutcomeOutOfRange { m: usize, d: usize },

    #[error("operation only defined for d={required}, got d={got}")]
    UnsupportedDimension { required: &'static str, got: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("too few Monte Carlo points: {got} < {min}")]
    TooFewPoints { got: u64, min: u64 },

    #[error("no closed form for d={0}")]
    NoClosedForm(usize),

    #[error("quadrature dimension too high for d={0}; use Monte Carlo")]
    UseMonteCarlo(usize),

    #[error("correlation vector too short for a stable ratio (|E|={0:e})")]
    DegenerateDirection(f64),

    #[error("overlap must be positive, got {0}")]
    InvalidOverlap(f64),

    #[error("underdetermined fit: {0} records")]
    Underdetermined(usize),

    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("exact enumeration of {0} strategies exceeds the cap; use the heuristic")]
    UseHeuristic(u128),

    #[error("no local region contains the point ({0}, {1})")]
    RegionMiss(f64, f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 usage, 3 resource cap, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ResourceLimit(_) | Error::UseHeuristic(_) | Error::UseMonteCarlo(_) => 3,
            Error::Numerical(_)
            | Error::RegionMiss(..)
            | Error::DegenerateDirection(_)
            | Error::InvalidOverlap(_) => 4,
            _ => 2,
        }
    }
}
