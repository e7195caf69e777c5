use std::path::Path;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] ssrt_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("png export: {0}")]
    Png(#[from] image::ImageError),

    /// Runs that hit the safety cap; their records are still written.
    #[error("{failed} of {total} runs stopped at the safety cap without reaching epsilon")]
    NotCompatible { failed: usize, total: usize },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(ssrt_core::Error::InvalidParameter(_) | ssrt_core::Error::InvalidGeometry(_)) => 2,
            HarnessError::NotCompatible { .. } => 3,
            _ => 4,
        }
    }
}
