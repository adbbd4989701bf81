use std::collections::BTreeMap;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the geometry engine.
///
/// Variants fall in two families: configuration and validation problems
/// (bad input, caller's fault) and numerical failures (the computation ran
/// but could not produce a finite or converged answer). [`Error::is_numerical`]
/// tells them apart.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("evaluation error: {message} (bindings: {})", format_snapshot(.snapshot))]
    Evaluation {
        message: String,
        snapshot: BTreeMap<String, f64>,
    },

    #[error("delta net derivative order {requested} exceeds the cap of 2")]
    DeltaOrder { requested: u8 },

    #[error("'{0}' is a reference-only symbol and cannot be differentiated or used in a metric")]
    ReferenceOnly(&'static str),

    #[error("singular metric at point {point:?}, eps = {eps}: |det| = {det:e}")]
    Singular { point: Vec<f64>, eps: f64, det: f64 },

    #[error("step size underflow at t = {t} (h = {h:e}): system too stiff")]
    Stiffness { t: f64, h: f64 },

    #[error("non-finite state at t = {t}: trajectory blew up")]
    BlowUp { t: f64 },

    #[error("quadrature failed to converge on [{a}, {b}]: estimated error {error:e}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("member eps = {eps} failed: {source}")]
    Member {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(String),
}

fn format_snapshot(snapshot: &BTreeMap<String, f64>) -> String {
    let parts: Vec<String> = snapshot.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

impl Error {
    pub fn eval(message: impl Into<String>) -> Self {
        Error::Evaluation {
            message: message.into(),
            snapshot: BTreeMap::new(),
        }
    }

    /// Attach a binding snapshot to an evaluation error; other variants pass through.
    pub fn with_snapshot(self, snapshot: BTreeMap<String, f64>) -> Self {
        match self {
            Error::Evaluation { message, .. } => Error::Evaluation { message, snapshot },
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Evaluation { .. }
            | Error::Singular { .. }
            | Error::Stiffness { .. }
            | Error::BlowUp { .. }
            | Error::Quadrature { .. } => true,
            Error::Member { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Syntax { .. } => "syntax",
            Error::Validation(_) => "validation",
            Error::Evaluation { .. } => "evaluation",
            Error::DeltaOrder { .. } => "delta_order",
            Error::ReferenceOnly(_) => "reference_only",
            Error::Singular { .. } => "singular",
            Error::Stiffness { .. } => "stiffness",
            Error::BlowUp { .. } => "blow_up",
            Error::Quadrature { .. } => "quadrature",
            Error::Member { .. } => "member",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
