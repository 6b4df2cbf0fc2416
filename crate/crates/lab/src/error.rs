use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] benign_core::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("configs are not comparable: {0}")]
    ConfigMismatch(String),

    #[error("{failed} of {total} trials failed (first: {first_reason})")]
    ExperimentFailed {
        failed: usize,
        total: usize,
        first_reason: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl LabError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_)
            | LabError::Parse { .. }
            | LabError::ConfigMismatch(_)
            | LabError::Core(_) => 2,
            LabError::ExperimentFailed { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
