use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<Self, EvalError> {
        if y_true.len() != y_pred.len() {
            return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
        }
        let mut counts = vec![vec![0u64; classes]; classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            for label in [t, p] {
                if label >= classes {
                    return Err(EvalError::LabelOutOfRange { label, classes });
                }
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn supports(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Header `true\pred,0,1,...`, one row per true class.
    pub fn write_csv(&self, path: &Path) -> Result<(), EvalError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..self.classes()).map(|c| c.to_string()).collect();
        writeln!(f, "true\\pred,{}", header.join(","))?;
        for (t, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(f, "{t},{}", cells.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Classes where a ratio was 0/0 and therefore set to 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    pub undefined_precision: Vec<usize>,
    pub undefined_recall: Vec<usize>,
    pub undefined_f1: Vec<usize>,
    /// Classes with no true samples, still counted in the macro means.
    pub zero_support: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub support: Vec<u64>,
    pub samples: u64,
    pub zero_division: String,
    pub flags: MetricFlags,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self, EvalError> {
        let c = cm.classes();
        let total = cm.total();
        if total == 0 {
            return Err(EvalError::EmptySplit);
        }
        let mut flags = MetricFlags::default();
        let mut per_class = Vec::with_capacity(c);
        let support = cm.supports();
        let mut correct = 0;
        for k in 0..c {
            let tp = cm.counts[k][k];
            correct += tp;
            let predicted: u64 = (0..c).map(|t| cm.counts[t][k]).sum();
            let precision = ratio(tp, predicted).unwrap_or_else(|| {
                flags.undefined_precision.push(k);
                0.0
            });
            let recall = ratio(tp, support[k]).unwrap_or_else(|| {
                flags.undefined_recall.push(k);
                0.0
            });
            if support[k] == 0 {
                flags.zero_support.push(k);
            }
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                flags.undefined_f1.push(k);
                0.0
            };
            per_class.push(ClassMetrics { precision, recall, f1, support: support[k] });
        }
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
        Ok(Self {
            accuracy: correct as f64 / total as f64,
            macro_precision: mean(|m| m.precision),
            macro_recall: mean(|m| m.recall),
            macro_f1: mean(|m| m.f1),
            per_class,
            support,
            samples: total,
            zero_division: "0/0 := 0".into(),
            flags,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Accuracy plus macro precision, recall and F1 over `classes` classes.
pub fn metrics(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<MetricsReport, EvalError> {
    MetricsReport::from_confusion(&ConfusionMatrix::new(y_true, y_pred, classes)?)
}
