use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const DOMAIN: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },
    #[error("row {0} has a different number of fields than the first row")]
    RaggedRows(usize),
    #[error("input holds no data rows")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid {what} file {}: {message}", path.display())]
    Artifact {
        what: &'static str,
        path: PathBuf,
        message: String,
    },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] kansr_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use kansr_core::Error as E;
        match self {
            CliError::Core(E::NonFiniteLoss { .. }) => exit::NUMERIC,
            CliError::Core(E::InvalidConfig(_) | E::InvalidSpec(_)) => exit::CONFIG,
            CliError::Core(_) => exit::DOMAIN,
            _ => exit::CONFIG,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::FileNotFound(path)
        } else {
            CliError::Io { path, source }
        }
    }

    pub(crate) fn artifact(
        what: &'static str,
        path: impl Into<PathBuf>,
        message: impl ToString,
    ) -> Self {
        CliError::Artifact {
            what,
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
