use std::fmt;
use std::process::ExitCode;

/// Failure of one subcommand, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Engine(clda::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) | CliError::Engine(clda::Error::Domain(_)) => 2,
            CliError::Engine(clda::Error::Numeric(_)) => 4,
            CliError::Data(_) | CliError::Engine(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "invalid data: {m}"),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<clda::Error> for CliError {
    fn from(e: clda::Error) -> Self {
        CliError::Engine(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Engine(clda::Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Engine(clda::Error::Json(e))
    }
}
