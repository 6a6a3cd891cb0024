use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("wavelength {wavelength} nm is not supported by medium {medium}")]
    UnsupportedWavelength { medium: String, wavelength: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("root solver failed: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("degenerate input: distillation acceptance probability is zero")]
    DegenerateInput,

    #[error("certain reset at nesting level {level}")]
    CertainReset { level: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown figure preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration-class failures (bad input) as opposed to numerical ones.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::UnsupportedWavelength { .. }
                | Error::Config(_)
                | Error::Schedule(_)
                | Error::GridMismatch(_)
                | Error::UnknownPreset(_)
                | Error::Json(_)
        )
    }
}
