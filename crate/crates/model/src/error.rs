use mvae_core::{AlignmentError, PenmanError, TripleError, ViewError};
use mvae_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("encoder features hold {got} entries but {nodes} nodes need {expected}")]
    FeatureShape { nodes: usize, expected: usize, got: usize },
    #[error("empty target sequence")]
    EmptyTarget,
    #[error("biaffine scoring needs at least 2 positions, got {0}")]
    TooShort(usize),
    #[error("arc index {index} outside {length} decoder states")]
    ArcOutOfRange { index: usize, length: usize },
    #[error("unknown arc label `{0}`")]
    UnknownLabel(String),
    #[error("parameter set is missing `{0}`")]
    MissingParameter(String),
    #[error("parameter `{name}` has shape {got:?}, expected {expected:?}")]
    ParameterShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("reconstruction heads are only partly present (`{0}` missing)")]
    PartialHeads(String),
    #[error("reconstruction heads are not loaded")]
    NoHeads,
    #[error("non-finite loss on example `{id}`: {source}")]
    NonFiniteLoss { id: String, source: NnError },
    #[error("{hyps} hypotheses for {refs} references")]
    CountMismatch { refs: usize, hyps: usize },
    #[error("example `{id}`: {message}")]
    Data { id: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Penman(#[from] PenmanError),
    #[error(transparent)]
    Triples(#[from] TripleError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
