//! Dense reverse-mode differentiation over a fixed operator set, plus Adam.
//!
//! A [`Graph`] records every operation applied to its [`Var`] handles and
//! [`Graph::backward`] sweeps the tape in reverse. Parameters live in a
//! [`ParamStore`] outside of any graph; each training step copies them in as
//! leaves, differentiates, and hands the gradients to [`Adam`].

mod adam;
mod checkpoint;
mod graph;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use graph::{softmax_rows, Gradients, Graph, Mode, Var, LOG_FLOOR, NORM_EPS};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
pub(crate) use tensor::gemm;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutogradError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: [usize; 2], right: [usize; 2] },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("dropout probability must lie in [0, 1), got {0}")]
    InvalidDropout(f64),
    #[error("objective must be a 1x1 scalar, got shape {0:?}")]
    NonScalarObjective([usize; 2]),
    #[error("index {index} out of range for dimension {bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
