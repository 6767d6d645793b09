use std::fmt;

/// A command failure with its exit code: 1 for invalid input, 2 for failures
/// while running.
#[derive(Debug)]
pub enum AppError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl AppError {
    pub fn validation(msg: impl fmt::Display) -> Self {
        AppError::Validation(anyhow::anyhow!("{msg}"))
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        AppError::Runtime(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 1,
            AppError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Validation(e) | AppError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<crate::io::LoadError> for AppError {
    fn from(e: crate::io::LoadError) -> Self {
        AppError::Validation(e.into())
    }
}

impl From<anyhow::Error> for AppError {
    fn from(e: anyhow::Error) -> Self {
        AppError::Runtime(e)
    }
}

/// Core errors raised while computing. Invalid input detected by the core
/// (unknown task, too few labels) still counts as a validation error.
impl From<mmscreen_core::Error> for AppError {
    fn from(e: mmscreen_core::Error) -> Self {
        match e {
            mmscreen_core::Error::Invalid(_) => AppError::Validation(e.into()),
            other => AppError::Runtime(other.into()),
        }
    }
}
