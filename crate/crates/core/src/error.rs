use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value fed to an operation is outside its domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A text format (OBJ, cloud file, CSV) could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A mesh or cloud is syntactically valid but structurally unusable.
    #[error("structure error: {0}")]
    Structure(String),

    /// A numeric routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("training diverged at step {step}: loss is not finite")]
    TrainingDiverged { step: usize },

    /// Bad or inconsistent configuration values.
    #[error("config error: {0}")]
    Config(String),

    /// Artifacts that must agree (fingerprints, model hashes) do not.
    #[error("artifact mismatch: {0}")]
    Mismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
