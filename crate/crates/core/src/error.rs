use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("invalid rational {text:?} at {location}")]
    BadRational { text: String, location: String },
    #[error("zero denominator at {location}")]
    ZeroDenominator { location: String },
    #[error("zero row at index {row}")]
    ZeroRow { row: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension {n} exceeds enumeration cap {cap}")]
    OverCap { n: usize, cap: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("sample cap of {cap} attempts exhausted")]
    SampleCapExhausted { cap: usize },
}

impl Error {
    /// Exit code convention shared by the command line: 2 for violated
    /// preconditions, 3 for unusable input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OverCap { .. } | Error::Precondition(_) | Error::SampleCapExhausted { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
