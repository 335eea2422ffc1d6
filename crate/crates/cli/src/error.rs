use std::path::PathBuf;

use calrisk::CalRiskError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{0}")]
    Schema(String),
    #[error("line {line}: {message}")]
    Consistency { line: u64, message: String },
    #[error("calibration needs binary input, got {0} classes")]
    UnsupportedMulticlass(usize),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] CalRiskError),
}

impl CliError {
    /// 2 for usage errors, 1 for everything caused by the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Parse { .. } => "ParseError",
            CliError::Schema(_) => "SchemaError",
            CliError::Consistency { .. } => "ConsistencyError",
            CliError::UnsupportedMulticlass(_) => "UnsupportedMulticlass",
            CliError::DegenerateSplit(_) => "DegenerateSplit",
            CliError::Io { .. } => "IoError",
            CliError::Library(CalRiskError::ClippingConflict { .. }) => "ClippingConflict",
            CliError::Library(_) => "DataError",
        }
    }

    /// Single-line JSON written to stderr on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Parse { line, .. } | CliError::Consistency { line, .. } => {
                v["line"] = json!(line);
            }
            CliError::Library(CalRiskError::ClippingConflict { max_lambda, .. }) => {
                v["max_lambda"] = json!(max_lambda);
            }
            _ => {}
        }
        v
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
