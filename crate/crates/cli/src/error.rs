use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// An experiment spec or a flag is malformed; maps to exit code 2.
    #[error("spec validation: {0}")]
    SpecValidation(String),
    /// A re-run of a registered spec produced a different summary.
    #[error("determinism: {0}")]
    Determinism(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lab(#[from] gradabs::LabError),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::SpecValidation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::SpecValidation(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
