use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Clap(#[from] clap::Error),
    #[error("invalid configuration: {0}")]
    Core(#[from] risemf_core::Error),
    #[error("validation failed")]
    ValidationFailed,
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 0 success, 1 usage, 2 validation failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(_) | CliError::ValidationFailed => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
