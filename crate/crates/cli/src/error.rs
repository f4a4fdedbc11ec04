use thiserror::Error;

/// Failures surfaced by the command-line front end, each with an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(#[from] tfit_core::Error),
    #[error("no constant regions detected; try a larger image, a smaller --min-block or a smaller --alpha")]
    NoConstantRegions,
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Data(tfit_core::Error::InvalidConfig(_)) => 2,
            CliError::Data(tfit_core::Error::NoConstantRegions) | CliError::NoConstantRegions => 4,
            CliError::Data(_) | CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
