//! Stage error taxonomy mapped onto process exit codes.

use std::fmt;

/// Exit codes: 0 success, 2 config error, 3 dependency error, 4 provider
/// error; anything else surfaces as 1.
#[derive(Debug)]
pub enum StageError {
    Config(String),
    Dependency(String),
    Provider(String),
    Other(anyhow::Error),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Config(_) => 2,
            StageError::Dependency(_) => 3,
            StageError::Provider(_) => 4,
            StageError::Other(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StageError::Config(_) => "config",
            StageError::Dependency(_) => "dependency",
            StageError::Provider(_) => "provider",
            StageError::Other(_) => "other",
        }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageError::Config(m) => write!(f, "config error: {m}"),
            StageError::Dependency(m) => write!(f, "dependency error: {m}"),
            StageError::Provider(m) => write!(f, "provider error: {m}"),
            StageError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for StageError {}

impl From<anyhow::Error> for StageError {
    fn from(e: anyhow::Error) -> Self {
        StageError::Other(e)
    }
}

impl From<std::io::Error> for StageError {
    fn from(e: std::io::Error) -> Self {
        StageError::Other(e.into())
    }
}
