use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("joint `{joint}`: {message}")]
    Topology { joint: String, message: String },

    #[error("joint `{joint}`: lower limit {lower} is not below upper limit {upper}")]
    Limits {
        joint: String,
        lower: f64,
        upper: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown frame `{0}`")]
    UnknownFrame(String),

    #[error("unknown sphere `{0}`")]
    UnknownSphere(String),

    #[error("unknown joint `{0}`")]
    UnknownJoint(String),

    #[error("invalid QP: {0}")]
    InvalidProblem(String),

    #[error("problem too large for enumeration: {vars} variables, {rows} rows")]
    SizeExceeded { vars: usize, rows: usize },

    #[error("batch problems have heterogeneous dimensions")]
    HeterogeneousBatch,

    #[error("segment embedding: {0}")]
    Embedding(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for errors caused by invalid models, configuration or input
    /// files rather than by a failure during computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Topology { .. }
                | Error::Limits { .. }
                | Error::InvalidModel(_)
                | Error::UnknownFrame(_)
                | Error::UnknownSphere(_)
                | Error::UnknownJoint(_)
                | Error::Embedding(_)
                | Error::Config(_)
                | Error::Csv(_)
                | Error::Toml(_)
        )
    }
}
