use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One configuration fault, located by dotted key path and source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{} (line {line}): {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{} configuration error(s):\n{}", .0.len(), list(.0))]
    Config(Vec<ConfigIssue>),
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: rabicrit_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn list(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn numerical(context: impl Into<String>) -> impl FnOnce(rabicrit_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Numerical { context, source }
    }
}
