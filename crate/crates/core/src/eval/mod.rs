//! Classification metrics, evaluation of a trained model, and embedding export.

mod metrics;

use std::path::Path;

use thiserror::Error;

use crate::autograd::Tensor;
use crate::model::{ModelError, PaccModel, Prediction};
use crate::views::{export_views, write_matrix, MatrixFile, MultiviewDataset, ViewError, ViewMatrix, OTHER_LAYER_CODE};

pub use metrics::{metrics, ClassMetrics, ConfusionMatrix, MetricFlags, MetricsReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label {label} outside [0, {classes})")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{0} true labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("split is empty")]
    EmptySplit,
    #[error("model expects {expected}, dataset has {found}")]
    DimMismatch { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub prediction: Prediction,
}

fn check_dims(model: &PaccModel, ds: &MultiviewDataset) -> Result<(), EvalError> {
    let dims = ds.dims();
    if dims != model.config.view_dims || ds.class_count != model.config.class_count {
        return Err(EvalError::DimMismatch {
            expected: format!("views {:?} with {} classes", model.config.view_dims, model.config.class_count),
            found: format!("views {dims:?} with {} classes", ds.class_count),
        });
    }
    Ok(())
}

/// Eval-mode predictions for the given rows of `ds`.
pub fn predict_rows(model: &PaccModel, ds: &MultiviewDataset, idx: &[usize]) -> Result<Prediction, EvalError> {
    check_dims(model, ds)?;
    let views: Vec<Tensor> = ds.views.iter().map(|v| v.batch(idx)).collect();
    Ok(model.predict(&views)?)
}

/// Metrics and confusion matrix on the rows `idx` of `ds`.
pub fn evaluate(model: &PaccModel, ds: &MultiviewDataset, idx: &[usize]) -> Result<Evaluation, EvalError> {
    if idx.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let prediction = predict_rows(model, ds, idx)?;
    let y: Vec<usize> = idx.iter().map(|&i| ds.labels[i]).collect();
    let confusion = ConfusionMatrix::new(&y, &prediction.classes, ds.class_count)?;
    let report = MetricsReport::from_confusion(&confusion)?;
    Ok(Evaluation { report, confusion, prediction })
}

fn to_f32(t: &Tensor) -> Vec<f32> {
    t.data().iter().map(|&v| v as f32).collect()
}

/// Latent codes of every row as a dataset with one view per layer.
pub fn embedding_dataset(model: &PaccModel, ds: &MultiviewDataset) -> Result<(MultiviewDataset, Prediction), EvalError> {
    let idx: Vec<usize> = (0..ds.n()).collect();
    let pred = predict_rows(model, ds, &idx)?;
    let views = ds
        .views
        .iter()
        .zip(&pred.latents)
        .map(|(v, z)| ViewMatrix::new(v.layer, z.rows(), z.cols(), to_f32(z)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = ds.clone();
    out.views = views;
    out.schemas = Vec::new();
    out.encoding = None;
    Ok((out, pred))
}

/// Writes per-layer latents in the view directory layout, plus
/// `fusion_weights.bin` (N × M) and `fused.bin` (N × M·D).
pub fn export_embeddings(model: &PaccModel, ds: &MultiviewDataset, dir: &Path) -> Result<MultiviewDataset, EvalError> {
    let (emb, pred) = embedding_dataset(model, ds)?;
    export_views(&emb, dir)?;
    for (name, t) in [("fusion_weights.bin", &pred.weights), ("fused.bin", &pred.fused)] {
        write_matrix(
            &dir.join(name),
            &MatrixFile { layer_code: OTHER_LAYER_CODE, rows: t.rows(), cols: t.cols(), data: to_f32(t) },
        )?;
    }
    Ok(emb)
}

#[cfg(test)]
mod tests;
