use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or contradictory configuration; a usage error at the CLI.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rfr_core::Error),
    #[error(transparent)]
    Theory(#[from] rfr_theory::Error),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A file named by a config key does not exist.
    #[error("`{key}` points to a missing file: {}", path.display())]
    MissingInput { key: &'static str, path: PathBuf },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit status for each error class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const NUMERIC: u8 = 3;
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use rfr_core::Error as C;
        match self {
            Error::Config(_) => exit::USAGE,
            Error::Core(C::Config(_)) => exit::USAGE,
            Error::Core(C::NonFinite { .. } | C::Divergence { .. } | C::DegenerateVariance) => exit::NUMERIC,
            Error::Core(_) => exit::DATA,
            Error::Theory(rfr_theory::Error::InvalidArgument(_)) => exit::USAGE,
            Error::Theory(_) => exit::NUMERIC,
            Error::Io { .. } | Error::MissingInput { .. } | Error::Json(_) => exit::DATA,
        }
    }
}
