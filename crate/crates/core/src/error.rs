use thiserror::Error;

/// Errors raised by the algebra, oracle, and reduction layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is outside the supported range [2, 2^31]")]
    ModulusOutOfRange(u64),
    #[error("field mismatch: F_{left} vs F_{right}")]
    FieldMismatch { left: u32, right: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("instance too large to enumerate: {0}")]
    InstanceTooLarge(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
