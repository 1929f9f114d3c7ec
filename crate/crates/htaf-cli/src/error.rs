//! CLI-level errors and their process exit codes.

use std::fmt;
use std::path::PathBuf;

use htaf_core::CoreError;

/// Errors raised by the harness: configuration problems, data problems,
/// and anything propagated from the core library.
#[derive(Debug)]
pub enum CliError {
    /// A file could not be read or written.
    Io { path: PathBuf, source: std::io::Error },
    /// CSV structure is unusable (no header, ragged rows).
    BadCsv { path: PathBuf, reason: String },
    /// A column named in the schema is missing from the file header.
    MissingColumn { path: PathBuf, column: String },
    /// A feature or target cell failed to parse. Rows are numbered from 1
    /// at the first data row.
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    /// The file has a header but no data rows.
    EmptyDataset { path: PathBuf },
    /// Fewer rows than the split protocol needs.
    TooFewRows { needed: usize, got: usize },
    /// The run configuration is invalid.
    Config { reason: String },
    /// Propagated core error.
    Core(CoreError),
}

impl CliError {
    /// Process exit code: 1 config, 2 data, 3 training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Io { .. }
            | CliError::BadCsv { .. }
            | CliError::MissingColumn { .. }
            | CliError::BadCell { .. }
            | CliError::EmptyDataset { .. }
            | CliError::TooFewRows { .. } => 2,
            CliError::Core(CoreError::TrainingDiverged { .. }) => 3,
            CliError::Core(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => {
                write!(f, "{}: {source}", path.display())
            }
            CliError::BadCsv { path, reason } => {
                write!(f, "{}: {reason}", path.display())
            }
            CliError::MissingColumn { path, column } => {
                write!(f, "{}: column '{column}' not found in header", path.display())
            }
            CliError::BadCell {
                path,
                row,
                column,
                value,
            } => write!(
                f,
                "{}: row {row}, column '{column}': cannot parse '{value}' as a number",
                path.display()
            ),
            CliError::EmptyDataset { path } => {
                write!(f, "{}: no data rows", path.display())
            }
            CliError::TooFewRows { needed, got } => {
                write!(f, "need at least {needed} rows to split, got {got}")
            }
            CliError::Config { reason } => write!(f, "config error: {reason}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            CliError::Core(e) => Some(e),
            _ => None,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        CliError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
