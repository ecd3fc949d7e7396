//! The two auxiliary views of a graph and the encoder's relation paths.

pub mod ground;
pub mod linearize;
pub mod paths;
pub mod spo;

pub use ground::{ground_triples, GroundedArc, GroundedArcSet, COMPOUND_LABEL, PLACEHOLDER_LABEL};
pub use linearize::{
    linearize, linearize_covering, reparse_linearized, ChildOrder, GraphToken, LinearizedGraph, TokenKind,
    FOREST_ROOT,
};
pub use paths::{
    all_pair_paths, path_feature, Direction, FeatureVocabulary, Hop, RelationPath, RelationPathFeature,
    DEFAULT_FEATURE_CAPACITY, NOPATH_FEATURE, SELF_FEATURE, UNK_FEATURE,
};
pub use spo::{extract_spo, Interaction};
