use picard_core::PicardError;
use thiserror::Error;

use crate::scenarios::SCENARIOS;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown scenario `{0}`; valid scenarios: {list}", list = SCENARIOS.join(", "))]
    UnknownScenario(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] PicardError),
}

impl HarnessError {
    /// Process exit status: 2 for usage errors, 3 for config problems, 4 for i/o, 5 for module errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::UnknownScenario(_) => 2,
            HarnessError::Parse(_) | HarnessError::Config(_) => 3,
            HarnessError::Io(_) => 4,
            HarnessError::Core(PicardError::Config(_)) => 3,
            HarnessError::Core(_) => 5,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
