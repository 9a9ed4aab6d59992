use shrinker::Error as LibError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lib(#[from] LibError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Exit status when all checks pass.
pub const EXIT_PASS: i32 = 0;
/// Exit status when a mathematical check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for configuration and I/O problems.
pub const EXIT_USAGE: i32 = 2;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                LibError::Io(_)
                | LibError::Csv(_)
                | LibError::Json(_)
                | LibError::Format(_)
                | LibError::Parameter(_)
                | LibError::InsufficientDomain(_) => EXIT_USAGE,
                _ => EXIT_CHECK_FAILED,
            },
        }
    }
}
