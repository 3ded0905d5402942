use std::process::ExitCode;

/// A failed command, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or mismatched input (exit 2).
    #[error("{0}")]
    Data(String),
    /// Training diverged or produced non-finite values (exit 3).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        })
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    /// Prefixes a library error with the file it came from.
    pub fn in_file(path: &std::path::Path, err: impl Into<seqtag::Error>) -> Self {
        let err = err.into();
        let message = format!("{}: {err}", path.display());
        match err {
            seqtag::Error::Numeric(_) => CliError::Numeric(message),
            seqtag::Error::Argument(_) => CliError::Usage(message),
            _ => CliError::Data(message),
        }
    }
}

/// Errors raised while running an already validated configuration; only
/// numeric failures keep their own status.
pub fn runtime(err: seqtag::Error) -> CliError {
    match err {
        seqtag::Error::Numeric(m) => CliError::Numeric(m),
        other => CliError::Data(other.to_string()),
    }
}

impl From<seqtag::Error> for CliError {
    fn from(err: seqtag::Error) -> Self {
        match err {
            seqtag::Error::Numeric(m) => CliError::Numeric(m),
            seqtag::Error::Argument(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}
