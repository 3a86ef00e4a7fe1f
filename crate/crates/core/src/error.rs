use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("line {line}: unknown sense label `{sense}`")]
    UnknownSense { line: usize, sense: String },
    #[error("line {line}: duplicate instance id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("invalid instance `{id}`: {reason}")]
    InvalidInstance { id: String, reason: String },
    #[error("invalid sense hierarchy: {0}")]
    Hierarchy(String),
    #[error("inconsistent mapping table: {0}")]
    Mapping(String),
    #[error("token `{0}` already present in vocabulary")]
    DuplicateToken(String),
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("sequence of length {len} exceeds max_len {max_len}")]
    LengthOverflow { len: usize, max_len: usize },
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("instance `{0}` has an empty argument after truncation")]
    EmptyArgument(String),
    #[error("connective `{0}` has no integrated token")]
    UnregisteredConnective(String),
    #[error("sense `{0}` is not covered by the answer space")]
    UncoveredSense(String),
    #[error("index {index} out of range for {n} classes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("temperature mismatch: store was built with T={store}, config has T={config}")]
    TemperatureMismatch { store: f64, config: f64 },
    #[error("missing teacher knowledge for instance `{0}`")]
    MissingKnowledge(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
