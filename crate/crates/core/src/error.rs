use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("sample {sample}: {field}: {msg}")]
    Schema {
        sample: String,
        field: String,
        msg: String,
    },
    #[error("invalid task: {0}")]
    Task(String),
    #[error("config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("weak label required: sample has no action labels")]
    NoActionLabel,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn schema(sample: &str, field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            sample: sample.to_string(),
            field: field.into(),
            msg: msg.into(),
        }
    }
}
