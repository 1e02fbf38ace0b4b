//! Dense double-precision tensors, a reverse-mode tape and Adam.

mod adam;
mod fastexp;
mod gradcheck;
mod sparse;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradient_check, GradCheck};
pub use sparse::{normalized_adjacency, SparseMatrix};
pub use tape::{Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("handle belongs to a reset tape, or backward already ran")]
    StaleTape,
    #[error("backward needs a 1x1 loss, got {0:?}")]
    NonScalarLoss([usize; 2]),
    #[error("pooling over an empty row set")]
    EmptyPool,
}
