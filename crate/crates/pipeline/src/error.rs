use std::path::{Path, PathBuf};

use amodal_core::assoc::AssocError;
use amodal_core::costfn::CostError;
use amodal_core::filters::FilterError;
use amodal_core::optimizer::OptimError;
use amodal_core::sceneprep::SceneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{path}:{line}: {reason}")]
    Schema { path: PathBuf, line: usize, reason: String },
    #[error("synthetic spec: {0}")]
    Synth(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

impl PipelineError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn parse(path: impl AsRef<Path>, reason: impl ToString) -> Self {
        Self::Parse { path: path.as_ref().to_path_buf(), reason: reason.to_string() }
    }

    /// Process exit code: 1 for validation problems, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 2,
            Self::Scene(SceneError::Io { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
