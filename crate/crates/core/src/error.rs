use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("empty graph")]
    EmptyGraph,
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge endpoint `{0}` names no node")]
    UnknownNode(String),
    #[error("self-loop edge on node `{0}`")]
    SelfLoop(String),
    #[error("root `{0}` names no node")]
    UnknownRoot(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PenmanErrorKind {
    #[error("empty input")]
    Empty,
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("relation `{0}` has no value")]
    RelationWithoutValue(String),
    #[error("duplicate definition of variable `{0}`")]
    DuplicateVariable(String),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unterminated string")]
    UnterminatedString,
    #[error("unexpected content after the graph")]
    TrailingContent,
    #[error("nesting deeper than {0} levels")]
    TooDeep(usize),
    #[error("{0}")]
    Graph(GraphError),
}

/// PENMAN syntax error with the character offset where it was detected.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at offset {offset}")]
pub struct PenmanError {
    pub kind: PenmanErrorKind,
    pub offset: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TripleError {
    #[error("empty graph")]
    EmptyGraph,
    #[error("line {line}: expected `subject | predicate | object`")]
    Separators { line: usize },
    #[error("line {line}: empty field")]
    EmptyField { line: usize },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ViewError {
    #[error("node `{0}` is unreachable from the root")]
    NodeUnreachable(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("unbalanced brackets at token {0}")]
    Unbalanced(usize),
    #[error("edge label at token {0} has no value")]
    DanglingEdgeLabel(usize),
    #[error("bare mention `{label}` at token {position} refers to no earlier node")]
    UndefinedMention { label: String, position: usize },
    #[error("expected {expected} at token {position}")]
    Unexpected {
        expected: &'static str,
        position: usize,
    },
    #[error("alignment index {index} of node `{node}` is outside a sentence of length {length}")]
    AlignmentOutOfRange {
        node: String,
        index: usize,
        length: usize,
    },
    #[error("{0}")]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("line {line}: expected `node-id<TAB>idx[,idx...]`")]
    Malformed { line: usize },
    #[error("line {line}: bad token index `{text}`")]
    BadIndex { line: usize, text: String },
    #[error("line {line}: repeated token index {index}")]
    RepeatedIndex { line: usize, index: usize },
    #[error("line {line}: duplicate node id `{id}`")]
    DuplicateNode { line: usize, id: String },
    #[error("no examples")]
    NoExamples,
}
