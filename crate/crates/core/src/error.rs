use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("input ended before the declared payload was complete")]
    Truncated,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector norm is below the degeneracy threshold")]
    ZeroVector,

    #[error("collection is empty")]
    EmptyCollection,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("atom {0} is all zero")]
    ZeroAtom(usize),

    #[error("dictionary mismatch: codes reference {expected:#018x}, dictionary is {found:#018x}")]
    DictionaryMismatch { expected: u64, found: u64 },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error("code has no non-null coefficients and cannot be decoded")]
    NullCode,

    #[error("item {0} has no non-null coefficients and cannot be decoded")]
    NullCodeAt(usize),

    #[error("projection onto the dictionary is degenerate")]
    DegenerateProjection,

    #[error("residual after projection is degenerate")]
    DegenerateResidual,

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("per-item rate is not below the baseline; no finite break-even size")]
    NoBreakEven,

    #[error("parameter grid is empty")]
    EmptyGrid,
}

impl Error {
    /// Maps an unexpected-EOF i/o error to [`Error::Truncated`].
    pub(crate) fn from_read(err: io::Error) -> Self {
        if err.kind() == io::ErrorKind::UnexpectedEof {
            Error::Truncated
        } else {
            Error::Io(err)
        }
    }
}
