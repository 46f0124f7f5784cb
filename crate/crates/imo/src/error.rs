use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"IMOE\"")]
    BadMagic([u8; 4]),
    #[error("unsupported IMOE version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown flag bits {0:#04x}")]
    UnknownFlags(u8),
    #[error("non-zero header padding")]
    BadPadding,
    #[error("truncated {section}: need {needed} more bytes, {available} available")]
    Truncated {
        section: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after the class table")]
    TrailingBytes(usize),
    #[error("header says {rows} x {dim}, which does not fit in memory")]
    Oversized { rows: u32, dim: u32 },
    #[error("normalized flag is {flag} but the rows {state}")]
    FlagMismatch { flag: bool, state: &'static str },
    #[error("class name {index} is not valid UTF-8")]
    InvalidUtf8 { index: usize },
    #[error("{0} does not fit the 32-bit header field")]
    TooLarge(&'static str),
    #[error("{path}: sha256 {actual} does not match manifest {expected}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: imo_core::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<imo_core::Error> for Error {
    fn from(source: imo_core::Error) -> Self {
        Error::Core {
            context: String::from("invalid data"),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn core_in(context: impl std::fmt::Display) -> impl FnOnce(imo_core::Error) -> Error {
    let context = context.to_string();
    move |source| Error::Core { context, source }
}
