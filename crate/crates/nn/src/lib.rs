//! Minimal dense numeric layer for the multi-view graph-to-text model.
//!
//! Tensors are flat row-major buffers. Every forward operation is recorded on
//! a [`Tape`]; [`Tape::backward`] replays the record in reverse and produces
//! exact gradients for every parameter leaf. The crate also carries the
//! finite-difference checker used to validate those gradients, the Adam
//! optimizer, and the binary checkpoint format.
//!
//! Values are generic over [`Real`], implemented for `f64` (the checking
//! mode) and `f32`.

mod adam;
mod checkpoint;
mod error;
mod gradcheck;
pub mod init;
mod params;
mod real;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{ParamId, ParamStore, Parameter};
pub use real::Real;
pub use tape::{Gradients, NodeId, Reduction, Tape};
pub use tensor::Tensor;
