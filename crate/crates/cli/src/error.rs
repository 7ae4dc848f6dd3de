use std::fmt;

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or incompatible inputs. Exit code 2.
    Usage(String),
    /// Anything that went wrong while doing the work. Exit code 1.
    Runtime(anyhow::Error),
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<malelm::Error> for CliError {
    fn from(e: malelm::Error) -> Self {
        use malelm::Error::*;
        match e {
            InvalidArgument { .. } | DimensionMismatch { .. } | UnknownActivation(_) | MissingRoot(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}
