use serde::Serialize;
use thiserror::Error;

/// Failures surfaced by the driver, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{message}")]
    Engine { kind: &'static str, numerical: bool, message: String },
    #[error("{0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Engine { numerical: false, .. } => 1,
            CliError::Engine { numerical: true, .. } => 2,
            CliError::Acceptance(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Engine { kind, .. } => kind,
            CliError::Acceptance(_) => "acceptance",
        }
    }

    /// The JSON object written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: Body<'a>,
        }
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Payload {
            error: Body {
                kind: self.kind(),
                exit_code: self.exit_code(),
                message: self.to_string(),
            },
        })
        .expect("error payload serializes")
    }
}

impl From<gengeom::Error> for CliError {
    fn from(e: gengeom::Error) -> Self {
        CliError::Engine {
            kind: e.kind(),
            numerical: e.is_numerical(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
