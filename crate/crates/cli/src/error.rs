use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: malformed density spec: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("density spec: {0}")]
    Spec(String),

    #[error("density spec failed validation:\n{0}")]
    Invalid(String),

    #[error("bundle was produced from spec {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },

    #[error("bundles differ in: {}", .0.join(", "))]
    BundleMismatch(Vec<String>),

    #[error("numerical refusal: {0}")]
    Numerical(#[from] lmo_core::Error),
}

impl CliError {
    /// 0 clean, 1 validation failure, 2 usage or I/O error, 3 numerical
    /// refusal.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Spec(_) => 2,
            CliError::Invalid(_) | CliError::HashMismatch { .. } | CliError::BundleMismatch(_) => 1,
            CliError::Numerical(_) => 3,
        }
    }
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
