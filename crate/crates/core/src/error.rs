use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no neighbor exists")]
    NoNeighbor,
    #[error("empty document {0:?}")]
    EmptyDocument(String),
    #[error("missing field {field} for scenario {scenario}")]
    MissingField {
        field: &'static str,
        scenario: &'static str,
    },
    #[error("empty candidate summary")]
    EmptyCandidate,
    #[error("missing source document {0:?}")]
    MissingDocument(String),
    #[error("numerical divergence")]
    NumericalDivergence,
    #[error("length mismatch: {left} != {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("undefined correlation")]
    UndefinedCorrelation,
    #[error("zero variance in paired differences")]
    ZeroVariance,
    #[error("missing annotation for doc {doc_id:?} system {system_id:?}")]
    MissingAnnotation { doc_id: String, system_id: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}
