use thiserror::Error;

/// Errors raised across the protocol, analyzer and simulation layers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,

    #[error("invalid field configuration: {0}")]
    ConfigError(String),

    #[error("decode system is singular; check the evaluation constants")]
    SingularSystem,

    #[error("N={n} is not admissible for case {case}: requires {rule}")]
    InadmissibleN { case: u8, n: usize, rule: &'static str },

    #[error("operation not defined for case {0}")]
    InvalidCase(u8),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("duplicate permuted index ({segment}, {subpacket}) in one upload")]
    DuplicateIndex { segment: usize, subpacket: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("B={0} does not divide P")]
    InvalidB(usize),

    #[error("enumeration of {0} joint realizations exceeds the feasibility bound")]
    InfeasibleEnumeration(u128),

    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),

    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
