use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown experiment `{0}` (see `regnoise list`)")]
    UnknownExperiment(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Numerics(#[from] regnoise::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl LabError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        LabError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code: 2 for bad input, 3 for numerical divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::UnknownExperiment(_) => 2,
            LabError::Numerics(e) if e.is_divergence() => 3,
            LabError::Numerics(
                regnoise::Error::InvalidParameter(_)
                | regnoise::Error::InvalidHurst(_)
                | regnoise::Error::Regime(_)
                | regnoise::Error::Dimension(_)
                | regnoise::Error::Empty(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;

pub(crate) fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}
