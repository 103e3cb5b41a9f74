use std::fmt;

use ccakit::{CcaError, ErrorKind};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or flags.
    Config(String),
    /// A core error raised while running `stage`.
    Stage { stage: &'static str, source: CcaError },
    /// Writing an output file failed.
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Output(_) => 3,
            CliError::Stage { source, .. } => match source.kind() {
                ErrorKind::Parameter => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Output(m) => write!(f, "output error: {m}"),
            CliError::Stage { stage, source } => {
                let kind = match source.kind() {
                    ErrorKind::Parameter => "parameter",
                    ErrorKind::Data => "data",
                    ErrorKind::Numerical => "numerical",
                };
                write!(f, "{kind} error in stage '{stage}': {source}")
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<CcaError> for CliError {
    fn from(source: CcaError) -> Self {
        CliError::Stage {
            stage: "configuration",
            source,
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for Result<T, CcaError> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
