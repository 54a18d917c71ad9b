//! File-level commands: each reads inputs from disk and writes an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::autograd::Tensor;
use crate::eval::{evaluate, export_embeddings, predict_rows, EvalError, MetricsReport};
use crate::info::{redundancy_report, InfoError, ReportOptions};
use crate::ingest::{ingest_dir, FlowOptions, IngestError, Manifest};
use crate::model::{ModelError, PaccModel};
use crate::trainer::{
    run_ablations, split, sweep, train, write_ablation_table, write_sweep_csv, SweepParam, SweepRow, Splits,
    TrainConfig, TrainError, Variant,
};
use crate::views::{build_views, export_views, import_views, MultiviewDataset, ViewConfig, ViewError};

pub const EFFECTIVE_CONFIG: &str = "effective_config.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("output directory {0} is not empty (pass --force to overwrite)")]
    OutputExists(String),
    #[error("{0} not found")]
    MissingInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown split {0:?} (expected train, val, test or all)")]
    UnknownSplit(String),
    #[error("row {row} outside [0, {n})")]
    RowOutOfRange { row: usize, n: usize },
    #[error("checkpoint metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// 2 for bad input or usage, 3 for failures while computing.
    pub fn exit_code(&self) -> i32 {
        use PipelineError as P;
        match self {
            P::OutputExists(_) | P::MissingInput(_) | P::Config(_) | P::UnknownSplit(_) | P::RowOutOfRange { .. } => 2,
            P::Json(_) => 2,
            P::Ingest(IngestError::ManifestNotFound(_) | IngestError::Manifest(_)) => 2,
            P::View(
                ViewError::UnknownLayer(_)
                | ViewError::UnknownField { .. }
                | ViewError::NoEnabledLayers
                | ViewError::FormatVersionMismatch(_)
                | ViewError::File { .. },
            ) => 2,
            P::Info(InfoError::InvalidBins(_) | InfoError::InvalidK { .. }) => 2,
            P::Train(TrainError::InvalidConfig(_)) | P::Model(ModelError::InvalidConfig(_)) => 2,
            P::Eval(EvalError::DimMismatch { .. } | EvalError::EmptySplit) => 2,
            _ => 3,
        }
    }
}

/// Everything a command can be configured with. Command-line flags override keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub views: ViewConfig,
    pub train: TrainConfig,
    pub analysis: ReportOptions,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|_| PipelineError::MissingInput(path.display().to_string()))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub command: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
    pub inputs: Vec<InputRecord>,
}

/// SHA-256 of a file, or of every file below a directory (relative path and bytes, sorted).
pub fn hash_path(path: &Path) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        let mut stack = vec![path.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d)? {
                let p = e?.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push(p);
                }
            }
        }
        files.sort();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(fs::read(&f)?);
        }
    } else {
        h.update(fs::read(path).map_err(|_| PipelineError::MissingInput(path.display().to_string()))?);
    }
    Ok(format!("{:x}", h.finalize()))
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force` is set (which clears it).
pub fn prepare_output(dir: &Path, force: bool) -> Result<(), PipelineError> {
    if dir.is_file() {
        return Err(PipelineError::OutputExists(dir.display().to_string()));
    }
    if dir.is_dir() && fs::read_dir(dir)?.next().is_some() {
        if !force {
            return Err(PipelineError::OutputExists(dir.display().to_string()));
        }
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_effective_config(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    extra: serde_json::Value,
    inputs: &[(&str, &Path)],
) -> Result<(), PipelineError> {
    let inputs = inputs
        .iter()
        .map(|(role, p)| {
            Ok(InputRecord { role: role.to_string(), path: p.display().to_string(), sha256: hash_path(p)? })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let eff = EffectiveConfig { command: command.into(), config: config.clone(), extra, inputs };
    fs::write(dir.join(EFFECTIVE_CONFIG), serde_json::to_string_pretty(&eff)?)?;
    Ok(())
}

fn load_views(dir: &Path) -> Result<MultiviewDataset, PipelineError> {
    if !dir.join("schema.json").is_file() {
        return Err(PipelineError::MissingInput(format!("view directory {}", dir.display())));
    }
    Ok(import_views(dir)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeSummary {
    pub flows: usize,
    pub skipped_unlabeled: usize,
    pub class_counts: Vec<(String, usize)>,
    pub view_dims: Vec<(String, usize)>,
}

/// Captures under `pcap_dir` labelled by `manifest` → view directory at `out`.
pub fn encode(pcap_dir: &Path, manifest_path: &Path, out: &Path, config: &ViewConfig) -> Result<EncodeSummary, PipelineError> {
    let manifest = Manifest::read(manifest_path)?;
    if !pcap_dir.is_dir() {
        return Err(PipelineError::MissingInput(format!("capture directory {}", pcap_dir.display())));
    }
    let flows = ingest_dir(pcap_dir, &manifest, FlowOptions::default())?;
    let total = flows.len();
    let flows: Vec<_> = flows.into_iter().filter(|f| f.label.is_some()).collect();
    let skipped = total - flows.len();
    if skipped > 0 {
        warn!("skipped {skipped} flows from captures not listed in the manifest");
    }
    let mut ds = build_views(&flows, config)?;
    ds.class_count = manifest.class_count().max(ds.class_count);
    ds.label_names = (0..ds.class_count)
        .map(|c| manifest.label_names.get(c).cloned().unwrap_or_else(|| c.to_string()))
        .collect();
    export_views(&ds, out)?;
    fs::write(out.join("labels.json"), manifest.labels_json())?;
    let summary = EncodeSummary {
        flows: ds.n(),
        skipped_unlabeled: skipped,
        class_counts: ds.label_names.iter().cloned().zip(ds.class_counts()).collect(),
        view_dims: ds.views.iter().map(|v| (v.layer.tag().to_string(), v.cols())).collect(),
    };
    info!("encoded {} flows into {} views", summary.flows, ds.m());
    Ok(summary)
}

fn named_tensors(ds: &MultiviewDataset) -> Vec<(String, Tensor)> {
    ds.views.iter().map(|v| (v.layer.tag().to_string(), v.to_tensor())).collect()
}

/// Redundancy report for a view directory, written as `report.json` and `report.csv`;
/// with `embeddings`, a second pair `embedding_report.*` for exported latents.
pub fn analyze(views: &Path, embeddings: Option<&Path>, out: &Path, options: &ReportOptions) -> Result<(), PipelineError> {
    if options.bins < 2 {
        return Err(InfoError::InvalidBins(options.bins).into());
    }
    let ds = load_views(views)?;
    let report = redundancy_report(&named_tensors(&ds), &ds.labels, options)?;
    report.write_json(&out.join("report.json"))?;
    report.write_csv(&out.join("report.csv"))?;
    if let Some(e) = embeddings {
        let emb = load_views(e)?;
        let report = redundancy_report(&named_tensors(&emb), &emb.labels, options)?;
        report.write_json(&out.join("embedding_report.json"))?;
        report.write_csv(&out.join("embedding_report.csv"))?;
    }
    Ok(())
}

/// Stored alongside the parameters in every checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub train: TrainConfig,
    pub splits: Splits,
    pub dataset_fingerprint: String,
    pub label_names: Vec<String>,
    pub class_weights: Vec<f64>,
    pub best_epoch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub split: String,
    pub rows: usize,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

fn write_eval(model: &PaccModel, ds: &MultiviewDataset, rows: &[usize], split: &str, out: &Path) -> Result<EvalOutput, PipelineError> {
    let ev = evaluate(model, ds, rows)?;
    let output = EvalOutput { split: split.into(), rows: rows.len(), metrics: ev.report };
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&output)?)?;
    ev.confusion.write_csv(&out.join("confusion.csv"))?;
    Ok(output)
}

/// Trains, saves `model.ckpt`, `history.csv`, `splits.json`, and test-split `metrics.json` / `confusion.csv`.
pub fn train_command(views: &Path, out: &Path, config: &TrainConfig) -> Result<EvalOutput, PipelineError> {
    let ds = load_views(views)?;
    let splits = split(&ds.labels, ds.class_count, config.split_mode, config.seed)?;
    let outcome = train(&ds, &splits, config)?;
    outcome.history.write_csv(&out.join("history.csv"))?;
    fs::write(out.join("splits.json"), serde_json::to_string(&splits)?)?;
    let meta = CheckpointMeta {
        train: config.clone(),
        splits: splits.clone(),
        dataset_fingerprint: ds.fingerprint(),
        label_names: ds.label_names.clone(),
        class_weights: outcome.class_weights.clone(),
        best_epoch: outcome.history.best_epoch,
    };
    outcome.model.save(&out.join(CHECKPOINT_FILE), serde_json::to_value(&meta)?)?;
    write_eval(&outcome.model, &ds, &splits.test, "test", out)
}

pub fn load_checkpoint(path: &Path) -> Result<(PaccModel, CheckpointMeta), PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::MissingInput(format!("checkpoint {}", path.display())));
    }
    let (model, meta) = PaccModel::load(path)?;
    let meta = serde_json::from_value(meta).map_err(|e| PipelineError::Metadata(e.to_string()))?;
    Ok((model, meta))
}

fn split_rows(meta: &CheckpointMeta, ds: &MultiviewDataset, name: &str) -> Result<Vec<usize>, PipelineError> {
    let rows = match name {
        "train" => meta.splits.train.clone(),
        "val" => meta.splits.val.clone(),
        "test" => meta.splits.test.clone(),
        "all" => return Ok((0..ds.n()).collect()),
        other => return Err(PipelineError::UnknownSplit(other.into())),
    };
    if ds.fingerprint() != meta.dataset_fingerprint {
        warn!("dataset differs from the one the checkpoint was trained on; split indices may not line up");
    }
    if let Some(&row) = rows.iter().find(|&&r| r >= ds.n()) {
        return Err(PipelineError::RowOutOfRange { row, n: ds.n() });
    }
    Ok(rows)
}

/// Metrics of a checkpoint on one split of a view directory.
pub fn eval_command(checkpoint: &Path, views: &Path, split: &str, out: &Path) -> Result<EvalOutput, PipelineError> {
    let (model, meta) = load_checkpoint(checkpoint)?;
    let ds = load_views(views)?;
    let rows = split_rows(&meta, &ds, split)?;
    write_eval(&model, &ds, &rows, split, out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPrediction {
    pub row: usize,
    pub flow: String,
    pub class: usize,
    pub label: String,
    pub probabilities: Vec<f64>,
    /// Layer tag to that layer head's class probabilities.
    pub layer_probabilities: Vec<(String, Vec<f64>)>,
    pub fusion_weights: Vec<(String, f64)>,
}

/// Per-flow predictions for the given rows (all rows when `rows` is empty).
pub fn predict_command(checkpoint: &Path, views: &Path, rows: &[usize]) -> Result<Vec<FlowPrediction>, PipelineError> {
    let (model, meta) = load_checkpoint(checkpoint)?;
    let ds = load_views(views)?;
    let rows: Vec<usize> = if rows.is_empty() { (0..ds.n()).collect() } else { rows.to_vec() };
    if let Some(&row) = rows.iter().find(|&&r| r >= ds.n()) {
        return Err(PipelineError::RowOutOfRange { row, n: ds.n() });
    }
    let pred = predict_rows(&model, &ds, &rows)?;
    let tags: Vec<String> = ds.views.iter().map(|v| v.layer.tag().to_string()).collect();
    Ok(rows
        .iter()
        .enumerate()
        .map(|(k, &row)| {
            let class = pred.classes[k];
            FlowPrediction {
                row,
                flow: ds.flow_index[row].flow.clone(),
                class,
                label: meta.label_names.get(class).cloned().unwrap_or_else(|| class.to_string()),
                probabilities: pred.probs.row(k).to_vec(),
                layer_probabilities: tags.iter().cloned().zip(pred.layer_probs.iter().map(|p| p.row(k).to_vec())).collect(),
                fusion_weights: tags.iter().cloned().zip(pred.weights.row(k).iter().copied()).collect(),
            }
        })
        .collect())
}

pub fn export_embeddings_command(checkpoint: &Path, views: &Path, out: &Path) -> Result<(), PipelineError> {
    let (model, _) = load_checkpoint(checkpoint)?;
    let ds = load_views(views)?;
    export_embeddings(&model, &ds, out)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub best_epoch: Option<usize>,
}

/// All variants on one split: `ablation_table.csv`, `ablation.json`, and a history per variant.
pub fn ablate_command(views: &Path, out: &Path, config: &TrainConfig) -> Result<Vec<AblationRow>, PipelineError> {
    let ds = load_views(views)?;
    let splits = split(&ds.labels, ds.class_count, config.split_mode, config.seed)?;
    let rows = run_ablations(&ds, &splits, config)?;
    write_ablation_table(&rows, &out.join("ablation_table.csv"))?;
    for (v, r) in &rows {
        r.outcome.history.write_csv(&out.join(format!("history_{}.csv", variant_slug(*v))))?;
    }
    let summary: Vec<AblationRow> = rows
        .iter()
        .map(|(v, r)| AblationRow {
            variant: v.label().into(),
            accuracy: r.test.accuracy,
            macro_precision: r.test.macro_precision,
            macro_recall: r.test.macro_recall,
            macro_f1: r.test.macro_f1,
            best_epoch: r.outcome.history.best_epoch,
        })
        .collect();
    fs::write(out.join("ablation.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn variant_slug(v: Variant) -> &'static str {
    match v {
        Variant::Full => "full",
        Variant::NoReconstruction => "no_rec",
        Variant::NoConsensus => "no_con",
        Variant::NoTaskInfo => "no_task_info",
        Variant::ClassifierOnly => "classifier_only",
    }
}

/// One run per value on a fixed split; writes `sweep.csv`.
pub fn sweep_command(
    views: &Path,
    out: &Path,
    config: &TrainConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>, PipelineError> {
    if values.is_empty() {
        return Err(PipelineError::Config("sweep needs at least one value".into()));
    }
    let ds = load_views(views)?;
    let splits = split(&ds.labels, ds.class_count, config.split_mode, config.seed)?;
    let rows = sweep(&ds, &splits, config, param, values)?;
    write_sweep_csv(&rows, &out.join("sweep.csv"))?;
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    SharedPrivate,
    Separable,
    Imbalanced,
    Captures,
}

impl std::str::FromStr for SynthKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| {
            PipelineError::Config(format!("unknown dataset kind {s:?} (shared-private, separable, imbalanced, captures)"))
        })
    }
}

/// Writes a synthetic view directory, or a capture directory with `manifest.csv`.
pub fn synth_command(kind: SynthKind, n: usize, seed: u64, out: &Path) -> Result<PathBuf, PipelineError> {
    use crate::synth;
    let ds = match kind {
        SynthKind::SharedPrivate => synth::shared_private(&synth::SharedPrivateSpec { n, ..Default::default() }, seed)?,
        SynthKind::Separable => synth::separable_two_view(n, seed)?,
        SynthKind::Imbalanced => synth::imbalanced(n, 10, seed)?,
        SynthKind::Captures => {
            let per_class = (n / 3).max(1);
            return Ok(synth::write_synthetic_captures(out, 3, per_class, seed)?);
        }
    };
    export_views(&ds, out)?;
    Ok(out.to_path_buf())
}

#[cfg(test)]
mod tests;
