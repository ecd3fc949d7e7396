//! Structure-aware graph-to-text model with two detachable reconstruction
//! heads: a biaffine scorer over grounded triples and a decoder for the
//! linearized graph.

pub mod biaffine;
pub mod bleu;
pub mod config;
pub mod data;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod generate;
pub mod layers;
pub mod model;
pub mod recall;
pub mod synthetic;
pub mod train;
pub mod vocab;

pub use biaffine::{ArcTarget, Biaffine, BiaffineScores};
pub use bleu::{corpus_bleu, BleuScore};
pub use config::ModelConfig;
pub use data::{AlignedExample, Record, Task, ViewOptions, Vocabularies};
pub use error::{ModelError, Result};
pub use generate::{encode_memory, generate, Generated, SearchMode};
pub use model::{loss_final, strip_heads, Instance, LossReport, Model, Objective};
pub use recall::{relation_recall, RecallReport};
pub use train::{make_batches, train, Corpus, Schedule, TrainConfig, Trained};
