use strip_lab_core::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] LabError),

    #[error("acceptance failure: {0}")]
    Acceptance(String),

    #[error("CSV does not match plot kind {kind}: {reason}")]
    SchemaMismatch { kind: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) | CliError::SchemaMismatch { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Acceptance(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        assert_eq!(CliError::ConfigInvalid(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(LabError::GridMisaligned).exit_code(), 3);
        assert_eq!(CliError::Acceptance(String::new()).exit_code(), 4);
    }
}
