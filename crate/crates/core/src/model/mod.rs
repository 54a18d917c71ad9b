//! The multiview network, its loss terms and the combined objective.

mod config;
mod losses;
mod network;

use thiserror::Error;

use crate::autograd::AutogradError;

pub use config::{LossTerms, LossWeights, ModelConfig, Objective};
pub use losses::{
    class_balance_weights, consensus_loss, fuse, fusion_scores, fusion_weights, global_ce, info_nce, layer_ce,
    raw_class_balance_weights, rec_loss, GateVars,
};
pub use network::{Batch, ForwardOutput, LossBreakdown, PaccModel, Prediction};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error("expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("every row in the reconstruction batch has zero norm")]
    AllRowsDegenerate,
    #[error("contrastive batch needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("label {label} outside [0, {classes})")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("beta must lie in [0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[cfg(test)]
mod tests;
