use std::path::PathBuf;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error in {law}: {detail}")]
    Domain { law: &'static str, detail: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("mesh: {0}")]
    Mesh(String),

    #[error("field length {got} does not match expected {expected}")]
    FieldLength { expected: usize, got: usize },

    #[error("unknown boundary marker `{0}`")]
    UnknownMarker(String),

    #[error("phase field: {0}")]
    PhaseField(String),

    #[error("linear solver: {0}")]
    Linear(String),

    #[error("time step {dt:e} s fell below dt_min at t = {t:e} s")]
    StepUnderflow { t: f64, dt: f64, dump: Option<PathBuf> },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("config{}: {msg}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(law: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { law, detail: detail.into() }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }
}
