use alloc::string::String;

/// Errors raised by the inference core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sampler error: {0}")]
    Sampler(String),
}

impl Error {
    /// Prefixes the message with `what`, keeping the kind.
    pub fn context(self, what: impl core::fmt::Display) -> Error {
        use alloc::format;
        match self {
            Error::Domain(m) => Error::Domain(format!("{what}: {m}")),
            Error::Data(m) => Error::Data(format!("{what}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{what}: {m}")),
            Error::Dimension(m) => Error::Dimension(format!("{what}: {m}")),
            Error::Config(m) => Error::Config(format!("{what}: {m}")),
            Error::Sampler(m) => Error::Sampler(format!("{what}: {m}")),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
