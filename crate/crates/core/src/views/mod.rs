//! Per-layer bit matrices built from flows.

mod encode;
mod io;
mod schema;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autograd::Tensor;
use crate::ingest::FlowRecord;

pub use encode::{apply_mask, encode_flow, MaskSpec, DEFAULT_FILL};
pub use io::{export_views, import_views, read_matrix, write_matrix, MatrixFile, OTHER_LAYER_CODE, VIEW_MAGIC, VIEW_VERSION};
pub use schema::{default_schemas, layer_schema, FieldSpec, LayerId, LayerSchema};

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("unknown layer {0:?}")]
    UnknownLayer(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown field {field} in layer {layer}")]
    UnknownField { layer: LayerId, field: String },
    #[error("no layers enabled")]
    NoEnabledLayers,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("flow {0} has no label")]
    Unlabeled(usize),
    #[error("view width mismatch: expected a multiple of {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("format version mismatch: {0}")]
    FormatVersionMismatch(String),
    #[error("invalid view data: {0}")]
    InvalidData(String),
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One layer's N × d_f matrix, stored as f32.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewMatrix {
    pub layer: LayerId,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl ViewMatrix {
    pub fn new(layer: LayerId, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, ViewError> {
        if data.len() != rows * cols {
            return Err(ViewError::InvalidData(format!("{} values for a {rows}x{cols} view", data.len())));
        }
        Ok(Self { layer, rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// d_f.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_ternary(&self) -> bool {
        self.data.iter().all(|&v| v == -1.0 || v == 0.0 || v == 1.0)
    }

    pub fn select_rows(&self, idx: &[usize]) -> ViewMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        ViewMatrix { layer: self.layer, rows: idx.len(), cols: self.cols, data }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(self.rows, self.cols, self.data.iter().map(|&v| v as f64).collect())
            .expect("shape checked at construction")
    }

    /// Selected rows widened to f64.
    pub fn batch(&self, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend(self.row(i).iter().map(|&v| v as f64));
        }
        Tensor::from_vec(idx.len(), self.cols, data).expect("row width is fixed")
    }
}

/// Where a dataset row came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRef {
    pub source: String,
    pub flow: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingInfo {
    pub packets_per_flow: usize,
    pub payload_bytes: usize,
    pub fill_value: f64,
    pub masked_fields: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiviewDataset {
    pub views: Vec<ViewMatrix>,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub label_names: Vec<String>,
    pub flow_index: Vec<FlowRef>,
    /// Schema per view, in view order. Empty for datasets not built from captures.
    pub schemas: Vec<LayerSchema>,
    pub encoding: Option<EncodingInfo>,
}

impl MultiviewDataset {
    /// Assembles a dataset from pre-built views; checks shapes and labels.
    pub fn from_views(views: Vec<ViewMatrix>, labels: Vec<usize>, class_count: usize) -> Result<Self, ViewError> {
        let ds = Self {
            flow_index: vec![FlowRef::default(); labels.len()],
            label_names: (0..class_count).map(|c| c.to_string()).collect(),
            views,
            labels,
            class_count,
            schemas: Vec::new(),
            encoding: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), ViewError> {
        if self.views.is_empty() {
            return Err(ViewError::NoEnabledLayers);
        }
        let n = self.labels.len();
        if let Some(v) = self.views.iter().find(|v| v.rows() != n) {
            return Err(ViewError::InvalidData(format!("{} view has {} rows, expected {n}", v.layer, v.rows())));
        }
        if self.flow_index.len() != n {
            return Err(ViewError::InvalidData("flow index length differs from row count".into()));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.class_count) {
            return Err(ViewError::InvalidData(format!("label {l} outside [0, {})", self.class_count)));
        }
        if !self.schemas.is_empty() && self.schemas.len() != self.views.len() {
            return Err(ViewError::InvalidData("one schema per view required".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn m(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.cols()).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.class_count];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn subset(&self, idx: &[usize]) -> MultiviewDataset {
        MultiviewDataset {
            views: self.views.iter().map(|v| v.select_rows(idx)).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            flow_index: idx.iter().map(|&i| self.flow_index[i].clone()).collect(),
            class_count: self.class_count,
            label_names: self.label_names.clone(),
            schemas: self.schemas.clone(),
            encoding: self.encoding.clone(),
        }
    }

    /// Keeps only the listed views, in the given order.
    pub fn select_views(&self, which: &[usize]) -> MultiviewDataset {
        let mut out = self.clone();
        out.views = which.iter().map(|&i| self.views[i].clone()).collect();
        if !self.schemas.is_empty() {
            out.schemas = which.iter().map(|&i| self.schemas[i].clone()).collect();
        }
        out
    }

    /// Hex SHA-256 over shapes, matrix bytes and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        for v in &self.views {
            h.update(v.layer.code().to_le_bytes());
            h.update((v.cols() as u64).to_le_bytes());
            for x in v.data() {
                h.update(x.to_le_bytes());
            }
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewConfig {
    pub layers: Vec<LayerId>,
    pub packets_per_flow: usize,
    pub payload_bytes: usize,
    pub fill_value: f64,
    pub mask: MaskSpec,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            layers: LayerId::ALL.to_vec(),
            packets_per_flow: 10,
            payload_bytes: 64,
            fill_value: DEFAULT_FILL,
            mask: MaskSpec::default_artifacts(),
        }
    }
}

/// Encodes every flow under each enabled layer and applies the mask.
///
/// Zero-width layers are dropped. Row order follows `flows`; class count is
/// one more than the largest label.
pub fn build_views(flows: &[FlowRecord], config: &ViewConfig) -> Result<MultiviewDataset, ViewError> {
    if config.packets_per_flow == 0 {
        return Err(ViewError::InvalidSchema("packets_per_flow must be at least 1".into()));
    }
    let schemas: Vec<LayerSchema> = config
        .layers
        .iter()
        .map(|&l| layer_schema(l, config.payload_bytes))
        .filter(|s| s.total_bits_per_packet > 0)
        .collect();
    if schemas.is_empty() {
        return Err(ViewError::NoEnabledLayers);
    }
    if flows.is_empty() {
        return Err(ViewError::EmptyDataset);
    }
    let all = default_schemas(config.payload_bytes);
    config.mask.validate(&all)?;
    let labels = flows
        .iter()
        .enumerate()
        .map(|(i, f)| f.label.ok_or(ViewError::Unlabeled(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let mask = MaskSpec { fill_value: config.fill_value, ..config.mask.clone() };
    let ppf = config.packets_per_flow;
    let views = schemas
        .iter()
        .map(|s| {
            let d_f = s.d_f(ppf);
            let rows: Vec<Vec<f32>> = flows.par_iter().map(|f| encode_flow(f, s, ppf, config.fill_value)).collect();
            let view = ViewMatrix::new(s.layer, flows.len(), d_f, rows.concat())?;
            apply_mask(&view, &mask, s)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let class_count = labels.iter().max().map_or(0, |m| m + 1);
    let ds = MultiviewDataset {
        views,
        flow_index: flows
            .iter()
            .map(|f| FlowRef { source: f.source_file.clone(), flow: f.key.to_string() })
            .collect(),
        label_names: (0..class_count).map(|c| c.to_string()).collect(),
        labels,
        class_count,
        schemas,
        encoding: Some(EncodingInfo {
            packets_per_flow: ppf,
            payload_bytes: config.payload_bytes,
            fill_value: config.fill_value,
            masked_fields: mask.entries(),
        }),
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests;
