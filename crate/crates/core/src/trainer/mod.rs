//! Seeded minibatch training with early stopping, ablations and sweeps.

mod config;
mod split;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::{Adam, AdamConfig, AutogradError, Mode};
use crate::eval::{evaluate, EvalError, MetricsReport};
use crate::model::{raw_class_balance_weights, Batch, LossBreakdown, ModelError, PaccModel};
use crate::views::MultiviewDataset;

pub use config::TrainConfig;
pub use split::{split, SplitMode, Splits};

/// Stream offset for minibatch shuffling, kept apart from the init stream.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 10 samples for an 8:1:1 split, got {0}")]
    TooFewSamples(usize),
    #[error("class {class} has {count} samples; at least 3 are needed")]
    ClassTooSmall { class: usize, count: usize },
    #[error("training split has fewer than 2 rows")]
    EmptyTrainSplit,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (first rows {rows:?}): {detail}")]
    NonFiniteLoss { epoch: usize, batch: usize, rows: Vec<usize>, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's minibatches.
    pub train: LossBreakdown,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: f64,
    /// Eval-mode objective over the training split before the first update.
    pub initial_train_loss: Option<LossBreakdown>,
}

impl TrainHistory {
    /// Equality ignoring wall-clock fields.
    pub fn same_trajectory(&self, other: &TrainHistory) -> bool {
        let strip = |h: &TrainHistory| {
            let mut h = h.clone();
            h.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
            h
        };
        strip(self) == strip(other)
    }

    pub fn total_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "epoch,rec,consensus,layer_ce,global_ce,total,val_accuracy,val_macro_f1,seconds")?;
        for e in &self.epochs {
            let t = &e.train;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{:.6}",
                e.epoch, t.rec, t.consensus, t.layer_ce, t.global_ce, t.total, e.val_accuracy, e.val_macro_f1, e.seconds
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: PaccModel,
    pub history: TrainHistory,
    pub class_weights: Vec<f64>,
}

/// Class-balance weights from the training rows, rescaled to mean 1.
/// Classes absent from the split are weighted as if seen once; they never enter the loss.
pub fn training_class_weights(ds: &MultiviewDataset, train: &[usize], beta: f64) -> Result<Vec<f64>, TrainError> {
    let mut counts = vec![0usize; ds.class_count];
    for &i in train {
        counts[ds.labels[i]] += 1;
    }
    let counts: Vec<usize> = counts.into_iter().map(|c| c.max(1)).collect();
    let raw = raw_class_balance_weights(&counts, beta)?;
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.into_iter().map(|w| w / mean).collect())
}

fn make_batch(ds: &MultiviewDataset, rows: &[usize]) -> Batch {
    Batch { views: ds.views.iter().map(|v| v.batch(rows)).collect(), labels: rows.iter().map(|&i| ds.labels[i]).collect() }
}

/// Splits `rows` into minibatches, dropping a trailing batch of one row.
fn minibatches(rows: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    rows.chunks(size).filter(|c| c.len() >= 2)
}

fn accumulate(acc: &mut LossBreakdown, bd: &LossBreakdown, n: f64) {
    if acc.rec_per_layer.len() != bd.rec_per_layer.len() {
        acc.rec_per_layer = vec![0.0; bd.rec_per_layer.len()];
    }
    for (a, b) in acc.rec_per_layer.iter_mut().zip(&bd.rec_per_layer) {
        *a += b / n;
    }
    acc.rec += bd.rec / n;
    acc.consensus += bd.consensus / n;
    acc.layer_ce += bd.layer_ce / n;
    acc.global_ce += bd.global_ce / n;
    acc.total += bd.total / n;
}

/// Trains on `splits.train`, selecting the epoch with the best accuracy on `splits.val`.
pub fn train(ds: &MultiviewDataset, splits: &Splits, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if splits.train.len() < 2 {
        return Err(TrainError::EmptyTrainSplit);
    }
    let mut model = PaccModel::new(config.model_config(ds.dims(), ds.class_count), config.seed)?;
    let class_weights = training_class_weights(ds, &splits.train, config.beta_cb)?;
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok(TrainOutcome { model, history, class_weights });
    }

    let batches: Vec<&[usize]> = minibatches(&splits.train, config.batch_size).collect();
    let mut initial = LossBreakdown::default();
    for rows in &batches {
        let bd = model.evaluate_loss(&make_batch(ds, rows), &class_weights, Mode::Eval, config.seed, 0)?;
        accumulate(&mut initial, &bd, batches.len() as f64);
    }
    history.initial_train_loss = Some(initial);

    let mut adam = Adam::new(AdamConfig { lr: config.lr, ..AdamConfig::default() }, &model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order = splits.train.clone();
    let mut best_params = model.params.clone();
    let mut stale = 0;
    let mut step = 0u64;
    for epoch in 0..config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut mean = LossBreakdown::default();
        let count = minibatches(&order, config.batch_size).count() as f64;
        for (b, rows) in minibatches(&order, config.batch_size).enumerate() {
            let (bd, grads) = model.loss_and_grads(&make_batch(ds, rows), &class_weights, Mode::Train, config.seed, step)?;
            let bad_grad = grads.iter().any(|g| !g.is_finite());
            if !bd.total.is_finite() || bad_grad {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    rows: rows.iter().take(8).copied().collect(),
                    detail: format!("{bd:?}, non-finite gradient: {bad_grad}"),
                });
            }
            adam.step(&mut model.params, &grads)?;
            accumulate(&mut mean, &bd, count);
            step += 1;
        }
        let val = evaluate(&model, ds, &splits.val)?.report;
        log::info!("epoch {epoch}: loss {:.4}, val accuracy {:.4}", mean.total, val.accuracy);
        history.epochs.push(EpochRecord {
            epoch,
            train: mean,
            val_accuracy: val.accuracy,
            val_macro_f1: val.macro_f1,
            seconds: started.elapsed().as_secs_f64(),
        });
        if history.best_epoch.is_none() || val.accuracy > history.best_val_accuracy {
            history.best_epoch = Some(epoch);
            history.best_val_accuracy = val.accuracy;
            best_params = model.params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    model.params = best_params;
    Ok(TrainOutcome { model, history, class_weights })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoReconstruction,
    NoConsensus,
    NoTaskInfo,
    ClassifierOnly,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Full, Variant::NoReconstruction, Variant::NoConsensus, Variant::NoTaskInfo, Variant::ClassifierOnly];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "PACC",
            Variant::NoReconstruction => "w/o Reconstruction",
            Variant::NoConsensus => "w/o Consensus",
            Variant::NoTaskInfo => "w/o Task-Info",
            Variant::ClassifierOnly => "w/ Classifier",
        }
    }

    /// The base configuration with this variant's terms switched off.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        let t = &mut c.objective.terms;
        match self {
            Variant::Full => {}
            Variant::NoReconstruction => t.rec = false,
            Variant::NoConsensus => t.con = false,
            Variant::NoTaskInfo => t.task_info = false,
            Variant::ClassifierOnly => {
                t.rec = false;
                t.con = false;
                t.task_info = false;
                t.global_ce = true;
            }
        }
        c
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    /// Metrics on the test split.
    pub test: MetricsReport,
}

/// Trains and evaluates on the test split.
pub fn train_and_test(ds: &MultiviewDataset, splits: &Splits, config: &TrainConfig) -> Result<RunResult, TrainError> {
    let outcome = train(ds, splits, config)?;
    let test = evaluate(&outcome.model, ds, &splits.test)?.report;
    Ok(RunResult { outcome, test })
}

/// Runs every variant in parallel on the same split.
pub fn run_ablations(
    ds: &MultiviewDataset,
    splits: &Splits,
    config: &TrainConfig,
) -> Result<Vec<(Variant, RunResult)>, TrainError> {
    Variant::ALL.par_iter().map(|&v| Ok((v, train_and_test(ds, splits, &v.apply(config))?))).collect()
}

pub fn write_ablation_table(rows: &[(Variant, RunResult)], path: &Path) -> Result<(), TrainError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "variant,accuracy,precision,recall,f1,best_epoch,epochs_run,train_seconds")?;
    for (v, r) in rows {
        let h = &r.outcome.history;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{:.3}",
            v.label(),
            r.test.accuracy,
            r.test.macro_precision,
            r.test.macro_recall,
            r.test.macro_f1,
            h.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
            h.epochs.len(),
            h.total_seconds()
        )?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Latent width D.
    Dim,
    /// Class-balance β.
    Beta,
}

impl std::str::FromStr for SweepParam {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dim" => Ok(SweepParam::Dim),
            "beta" => Ok(SweepParam::Beta),
            other => Err(TrainError::InvalidConfig(format!("sweep parameter must be dim or beta, got {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl SweepParam {
    pub fn apply(self, base: &TrainConfig, value: f64) -> Result<TrainConfig, TrainError> {
        let mut c = base.clone();
        match self {
            SweepParam::Dim => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(TrainError::InvalidConfig(format!("dimension must be a positive integer, got {value}")));
                }
                c.latent_dim = value as usize;
            }
            SweepParam::Beta => c.beta_cb = value,
        }
        c.validate()?;
        Ok(c)
    }
}

/// One training run per value, in parallel; rows follow the order of `values`.
pub fn sweep(
    ds: &MultiviewDataset,
    splits: &Splits,
    config: &TrainConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>, TrainError> {
    let configs = values.iter().map(|&v| param.apply(config, v)).collect::<Result<Vec<_>, _>>()?;
    configs
        .par_iter()
        .zip(values)
        .map(|(c, &value)| {
            let r = train_and_test(ds, splits, c)?;
            Ok(SweepRow { value, accuracy: r.test.accuracy, macro_f1: r.test.macro_f1 })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), TrainError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "value,accuracy,macro_f1")?;
    for r in rows {
        writeln!(f, "{},{},{}", r.value, r.accuracy, r.macro_f1)?;
    }
    f.flush()?;
    Ok(())
}
