use std::path::{Path, PathBuf};

use pmu_synth_core::Error as CoreError;

/// Process exit status for configuration and usage problems.
pub const EXIT_USAGE: i32 = 2;
/// Process exit status for I/O, data and numerical failures.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Runtime(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => core_exit_code(e),
            CliError::Runtime(_) | CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Config(_) | CoreError::Shape(_) => EXIT_USAGE,
        CoreError::Sample { source, .. } => core_exit_code(source),
        _ => EXIT_RUNTIME,
    }
}

pub type CliResult<T> = Result<T, CliError>;
