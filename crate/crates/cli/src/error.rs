use riccati_core::ilrsi::SolveFailure;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const CONVERGED: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const MAX_ITER: u8 = 2;
    pub const BREAKDOWN: u8 = 3;
    pub const VERIFY_FAILED: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Problem(#[from] riccati_core::Error),
    #[error("solver stopped: {0}")]
    Solve(#[from] SolveFailure),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solve(_) => exit::BREAKDOWN,
            _ => exit::CONFIG,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
