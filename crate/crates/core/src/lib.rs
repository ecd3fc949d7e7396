//! Graphs, their parsers, the derived views used as training targets, and
//! node-to-token alignment.

pub mod alignment;
pub mod error;
pub mod graph;
pub mod iso;
pub mod penman;
pub mod random;
pub mod triples;
pub mod views;

pub use alignment::{coverage_report, load_alignments, match_kg_nodes, Alignment, CoverageReport};
pub use error::{AlignmentError, GraphError, PenmanError, PenmanErrorKind, TripleError, ViewError};
pub use graph::{expand_reentrancies, simplify, strip_sense, Edge, LabeledGraph, Node, NodeKind};
pub use iso::is_isomorphic;
pub use penman::{parse_penman, to_penman};
pub use triples::{parse_triples, to_triples};
