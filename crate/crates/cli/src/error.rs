use std::path::Path;

/// Failure of a command, carrying its process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed inputs.
    #[error("{0}")]
    Validation(String),
    /// Weight file problems, including a preset mismatch.
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Format(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with the file it concerns.
    pub(crate) fn context(self, path: &Path) -> Self {
        let p = path.display();
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{p}: {m}")),
            CliError::Format(m) => CliError::Format(format!("{p}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{p}: {m}")),
        }
    }
}

impl From<dcse::Error> for CliError {
    fn from(e: dcse::Error) -> Self {
        use dcse::Error::*;
        let msg = e.to_string();
        match e {
            InvalidInput(_) | DegenerateInput(_) | Parameter(_) | Infeasible(_) => CliError::Validation(msg),
            Format(_) => CliError::Format(msg),
            Numerical(_) => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
