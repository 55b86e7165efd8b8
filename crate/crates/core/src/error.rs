use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("field order {0} is not a prime in [2, 65536]")]
    InvalidField(u64),

    #[error("operands live over different fields (q={left} vs q={right})")]
    FieldMismatch { left: u32, right: u32 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("ambient dimension mismatch: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("entry {value} out of range for q={q}")]
    EntryOutOfRange { value: u64, q: u32 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration of q^(l*m) = {q}^{exponent} matrices exceeds the 2^24 guard")]
    EnumerationGuard { q: u32, exponent: usize },

    #[error("empty affine intersection on edge {edge} at iteration {iteration}")]
    InconsistentMessages { edge: usize, iteration: usize },

    #[error("noise-space recovery found dimension {found}, expected {expected}")]
    NoiseSpaceDeficient { found: usize, expected: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
