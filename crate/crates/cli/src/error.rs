use dauval::{Error, ErrorKind};

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{context}: {source}")]
    WithContext { context: String, source: Error },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self::Usage(message.into())
    }

    pub fn context(source: Error, context: impl Into<String>) -> Self {
        Self::WithContext {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        let kind = match self {
            Self::Usage(_) => ErrorKind::Usage,
            Self::Core(e) | Self::WithContext { source: e, .. } => e.kind(),
        };
        match kind {
            ErrorKind::Usage => 2,
            ErrorKind::Fit => 3,
            ErrorKind::Data => 4,
        }
    }
}
