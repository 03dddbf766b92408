use std::fmt;

use hijackmap::Error;

/// Failure of a command, carrying its exit status class.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing input: exit 2.
    Input(String),
    /// Artifacts that do not belong together: exit 3.
    Consistency(String),
    /// Anything else: exit 1.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Consistency(_) => 3,
            CliError::Internal(_) => 1,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    /// Wraps a core error with context, classifying it by kind.
    pub fn from_core(context: &str, e: Error) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            Error::Nn(_) => CliError::Internal(msg),
            Error::Io(ref io) if io.kind() != std::io::ErrorKind::NotFound => CliError::Internal(msg),
            _ => CliError::Input(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Consistency(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
