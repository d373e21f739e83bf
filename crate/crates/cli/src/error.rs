use thiserror::Error;

/// CLI errors; each maps to a process exit code.
#[derive(Error, Debug)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("check failure: {0}")]
    CheckFailed(String),

    #[error("numerical blow-up: {0}")]
    BlowUp(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] fbsde_core::CoreError),
}

impl CliError {
    /// 0 success, 1 check failure, 2 config error, 3 numerical blow-up.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Core(fbsde_core::CoreError::BlowUp { .. }) => 3,
            CliError::Core(fbsde_core::CoreError::NonFinite { .. }) => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
