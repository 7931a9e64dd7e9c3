use std::fmt;
use std::path::{Path, PathBuf};

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Parse(String),
    Numeric(cfnorm::Error),
    Degenerate(String),
    NonFinite(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Parse(_) => exit::PARSE,
            CliError::Numeric(_) | CliError::Degenerate(_) | CliError::NonFinite(_) => exit::NUMERIC,
            CliError::Io { .. } => exit::IO,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Numeric(e) => write!(f, "numeric error: {e}"),
            CliError::Degenerate(m) => write!(f, "numeric error: {m}"),
            CliError::NonFinite(field) => write!(f, "numeric error: non-finite value in `{field}`"),
            CliError::Io { path, source } => write!(f, "I/O error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cfnorm::Error> for CliError {
    fn from(e: cfnorm::Error) -> Self {
        match e {
            cfnorm::Error::InvalidArgument(m) => CliError::Usage(m),
            e @ cfnorm::Error::UnsupportedDimension { .. } => CliError::Usage(e.to_string()),
            e => CliError::Numeric(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
