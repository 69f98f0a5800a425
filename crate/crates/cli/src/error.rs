//! Error type of the pipeline driver, with process exit-code mapping.
//!
//! Exit codes: 0 on success, 2 for configuration problems (bad syntax,
//! invalid values, missing keys), 3 for failures while running a stage or
//! touching artifacts.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Config file problems: syntax, units, unknown keys, invalid values.
    #[error("config error: {0}")]
    Config(String),
    /// A pipeline stage failed; artifacts of completed stages are preserved.
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        source: rcaus::Error,
    },
    /// Filesystem trouble on a specific artifact.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A binary artifact violated the dataset format (bad magic, kind
    /// mismatch, truncated payload).
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl CliError {
    /// Process exit code this error maps to.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
