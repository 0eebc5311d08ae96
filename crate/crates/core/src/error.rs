use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// What went wrong while decoding a `CPNT` byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    BadMagic,
    UnsupportedVersion(u8),
    Truncated { needed: usize, available: usize },
    ZeroExtent,
    ExtentOverflow,
    TrailingBytes(usize),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::BadMagic => f.write_str("bad magic, expected \"CPNT\""),
            FormatError::UnsupportedVersion(v) => write!(f, "unsupported version {v}"),
            FormatError::Truncated { needed, available } => {
                write!(f, "truncated: need {needed} bytes, {available} available")
            }
            FormatError::ZeroExtent => f.write_str("zero extent"),
            FormatError::ExtentOverflow => f.write_str("element count overflows"),
            FormatError::TrailingBytes(n) => write!(f, "{n} trailing bytes after payload"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed `CPNT` bytes; `offset` is where decoding stopped.
    Format { offset: usize, kind: FormatError },
    /// A precondition on an argument does not hold.
    Argument(String),
    /// Shapes of two inputs disagree.
    Shape {
        what: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    /// Evaluation inputs reference image ids that are not part of the image set.
    InconsistentIds(Vec<u64>),
    /// The synthetic oracle could not produce a separable scene within budget.
    ResampleBudget { attempts: u32 },
    /// An internal invariant was violated; this is a bug.
    Invariant(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(offset: usize, kind: FormatError) -> Self {
        Error::Format { offset, kind }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Format { offset, kind } => write!(f, "CPNT format error at byte {offset}: {kind}"),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Shape {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch for {what}: expected {expected:?}, found {found:?}"),
            Error::InconsistentIds(ids) => write!(f, "unknown image ids: {ids:?}"),
            Error::ResampleBudget { attempts } => {
                write!(f, "no separable scene after {attempts} attempts")
            }
            Error::Invariant(msg) => write!(f, "invariant violated: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
