use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("degenerate histogram: image has a single intensity value")]
    DegenerateHistogram,
    #[error("config error: {0}")]
    Config(String),
    #[error("config error in block {index}: {msg}")]
    Block { index: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad magic: not a checkpoint file")]
    BadMagic,
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("unknown visibility tag `{0}`")]
    UnknownTag(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("duplicate path in manifest: {}", .0.display())]
    DuplicatePath(PathBuf),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("non-finite value at epoch {epoch}, step {step}: {detail}")]
    NonFinite { epoch: usize, step: usize, detail: String },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    RawIo(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Block { .. } | Error::UnknownKey(_) | Error::InvalidInput(_) => {
                ErrorClass::Usage
            }
            Error::NonFinite { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
