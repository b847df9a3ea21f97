use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("arbitration weight {0} outside [0, 1]")]
    BetaOutOfRange(f64),
    #[error("interaction prefix is empty")]
    EmptyPrefix,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no-assist normalizer must be positive, got {0}")]
    ZeroNormalizer(f64),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("missing artifact for method {0}")]
    MissingArtifact(&'static str),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
