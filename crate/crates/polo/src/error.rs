use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The config or world file does not parse; carries the parser position.
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    /// The file parses but a field holds an unusable value.
    #[error("{}: {field}: {message}", path.display())]
    Invalid {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{job}: {source}")]
    Run { job: String, source: polo_core::Error },
    /// Runs completed but a checked property failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        let message = err.to_string();
        // serde_json appends " at line L column C"; the position is reported separately
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        CliError::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message,
        }
    }

    pub fn invalid(path: impl Into<PathBuf>, field: impl Into<String>, message: impl ToString) -> Self {
        CliError::Invalid {
            path: path.into(),
            field: field.into(),
            message: message.to_string(),
        }
    }

    /// 2 for unusable configuration, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Invalid { .. } => 2,
            _ => 1,
        }
    }
}
