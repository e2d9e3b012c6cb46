use ordmeta_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// 1 for model or numeric failures, 2 for I/O and configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Input(_) => 2,
            Error::Core(CoreError::Config(_) | CoreError::Data(_)) => 2,
            Error::Core(_) => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}
