use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] plwk_core::Error),
    #[error("cannot read config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{failed} of {total} runs failed")]
    RunsFailed { failed: usize, total: usize },
    #[error("self-check failed: {0}")]
    CheckFailed(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for invalid input, 2 for failures while
    /// solving or writing results, 3 for failed self-checks.
    pub fn exit_code(&self) -> i32 {
        use plwk_core::Error as E;
        match self {
            Self::Validation(_) | Self::ConfigFile { .. } => 1,
            Self::Core(
                E::TauTooSmall { .. }
                | E::EtaOutOfRange(_)
                | E::ThetaOutOfRange { .. }
                | E::LambdaMaxTooSmall { .. }
                | E::InvalidConfig(_)
                | E::DimensionMismatch { .. }
                | E::IndexOutOfRange { .. },
            ) => 1,
            Self::CheckFailed(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
