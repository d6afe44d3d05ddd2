use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A constructor or operation received a value outside its valid range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("reading {value} at index {index} is outside the domain of `{spec}`")]
    DomainViolation {
        spec: String,
        index: usize,
        value: f64,
    },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    /// Gain with zero magnitude cannot be inverted.
    #[error("sensor {index} has a zero-magnitude gain; inversion is undefined")]
    ZeroGain { index: usize },

    /// The adder output y = 1 is ambiguous unless (1,0) has zero probability.
    #[error("pair ({s1},{s2}) is outside the support of the uncoded decoder")]
    AmbiguousPair { s1: bool, s2: bool },

    #[error("nomographic identity failed for `{spec}`: g(sum h) = {composed}, f = {direct}")]
    IdentityViolation {
        spec: String,
        composed: f64,
        direct: f64,
    },

    #[error("no satellite in line of sight at any sampled epoch")]
    NoVisibility,

    #[error("configuration rejected: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
