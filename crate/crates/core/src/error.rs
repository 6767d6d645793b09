use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input data violates a documented invariant.
    Invalid(String),
    /// A training fold holds a single class, so no classifier can be fit.
    DegenerateFold,
    /// A fairness quantity needs at least two non-empty groups.
    FairnessUndefined(String),
    /// EM produced a non-finite log-likelihood.
    NonFinite { iteration: usize },
    /// Shape mismatch between two inputs.
    Dimension { expected: usize, found: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::DegenerateFold => f.write_str("degenerate fold: training labels hold a single class"),
            Error::FairnessUndefined(msg) => write!(f, "fairness undefined: {msg}"),
            Error::NonFinite { iteration } => {
                write!(f, "EM produced a non-finite log-likelihood at iteration {iteration}")
            }
            Error::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
