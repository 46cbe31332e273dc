use alloc::string::String;
use core::fmt;

/// Errors surfaced by the core pipelines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Dimension mismatch; carries both shapes so the caller can see what
    /// was passed where.
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },
    /// Malformed serialized data (IDX files, checkpoints).
    Format(String),
    /// An input violated an operation's contract (invalid one-hot, negative
    /// probability, out-of-range index, ...).
    InvalidInput(String),
    /// Input is degenerate for the requested operation (all-zero row fed to
    /// the power normalizer, empty dataset, ...).
    Degenerate(String),
    /// An API contract was violated (non-scalar loss, missing field, ...).
    Contract(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                context,
                expected,
                actual,
            } => write!(f, "{context}: shape mismatch, expected {expected}, got {actual}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
