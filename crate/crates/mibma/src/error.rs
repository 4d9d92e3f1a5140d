use std::path::Path;

/// Failures surfaced by the command line, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files (exit code 2).
    #[error("{0}")]
    Usage(String),
    /// Failures while computing or writing results (exit code 1).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

impl From<mibma_core::Error> for CliError {
    fn from(e: mibma_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
