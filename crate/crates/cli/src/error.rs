//! Command-level errors and their machine-readable form.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] itemcal::Error),

    /// A stage ran before the stage that produces one of its inputs.
    #[error("missing artifact `{artifact}`: run `{producer}` first or pass it explicitly")]
    MissingArtifact { artifact: String, producer: &'static str },

    #[error("missing input `{0}`")]
    MissingInput(String),

    #[error("{0}")]
    Usage(String),

    #[error("cannot write `{path}`: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::MissingArtifact { .. } => "missing_artifact",
            CliError::MissingInput(_) => "missing_input",
            CliError::Usage(_) => "usage",
            CliError::Write { .. } => "io",
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}` on one line.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Record<'a> {
            error: Body<'a>,
        }
        let record = Record {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
            },
        };
        serde_json::to_string(&record).unwrap_or_else(|_| format!("{{\"error\":{{\"kind\":\"{}\"}}}}", self.kind()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
