use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::ModelConfig;
use crate::views::{import_views, read_matrix, LayerId};

/// Direct per-class counting, written independently of the confusion matrix.
fn oracle(y: &[usize], p: &[usize], c: usize) -> (f64, f64, f64, f64) {
    let n = y.len() as f64;
    let acc = y.iter().zip(p).filter(|(a, b)| a == b).count() as f64 / n;
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for k in 0..c {
        let tp = y.iter().zip(p).filter(|&(&a, &b)| a == k && b == k).count() as f64;
        let fp = y.iter().zip(p).filter(|&(&a, &b)| a != k && b == k).count() as f64;
        let fneg = y.iter().zip(p).filter(|&(&a, &b)| a == k && b != k).count() as f64;
        let pr = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
        let rc = if tp + fneg == 0.0 { 0.0 } else { tp / (tp + fneg) };
        let f = if pr + rc == 0.0 { 0.0 } else { 2.0 * pr * rc / (pr + rc) };
        sp += pr;
        sr += rc;
        sf += f;
    }
    (acc, sp / c as f64, sr / c as f64, sf / c as f64)
}

fn expand(cm: &[[usize; 2]; 2]) -> (Vec<usize>, Vec<usize>) {
    let (mut y, mut p) = (Vec::new(), Vec::new());
    for t in 0..2 {
        for q in 0..2 {
            for _ in 0..cm[t][q] {
                y.push(t);
                p.push(q);
            }
        }
    }
    (y, p)
}

#[test]
fn perfect_predictions() {
    let y = vec![0, 1, 2, 2, 1];
    let r = metrics(&y, &y, 3).unwrap();
    for v in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1] {
        assert_eq!(v, 1.0);
    }
}

#[test]
fn two_by_two_table() {
    let (y, p) = expand(&[[3, 1], [2, 4]]);
    let r = metrics(&y, &p, 2).unwrap();
    let (acc, pr, rc, f1) = oracle(&y, &p, 2);
    assert_eq!(r.accuracy, 0.7);
    assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), (acc, pr, rc, f1));
    assert!((r.macro_precision - 0.7).abs() < 1e-15);
    assert!((r.macro_recall - 17.0 / 24.0).abs() < 1e-15);
    assert!((r.macro_f1 - 23.0 / 33.0).abs() < 1e-15);
    assert_eq!(r.support, vec![4, 6]);
}

#[test]
fn constant_predictor() {
    let y = vec![0, 1, 0, 1, 0, 1];
    let r = metrics(&y, &[0; 6], 2).unwrap();
    assert_eq!(r.accuracy, 0.5);
    assert_eq!(r.macro_recall, 0.5);
    assert_eq!(r.macro_precision, 0.25);
    assert_eq!(r.flags.undefined_precision, vec![1]);
}

#[test]
fn zero_support_is_flagged_and_averaged() {
    let r = metrics(&[0, 0], &[0, 0], 3).unwrap();
    assert_eq!(r.flags.zero_support, vec![1, 2]);
    assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn errors() {
    assert!(matches!(metrics(&[0, 3], &[0, 1], 2), Err(EvalError::LabelOutOfRange { label: 3, classes: 2 })));
    assert!(matches!(metrics(&[], &[], 2), Err(EvalError::EmptySplit)));
    assert!(matches!(metrics(&[0], &[0, 1], 2), Err(EvalError::LengthMismatch(1, 2))));
}

#[test]
fn matches_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let c = rng.gen_range(2..6);
        let n = rng.gen_range(1..60);
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let r = metrics(&y, &p, c).unwrap();
        assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), oracle(&y, &p, c));
    }
}

proptest! {
    #[test]
    fn report_invariants(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80)) {
        let (y, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let cm = ConfusionMatrix::new(&y, &p, 4).unwrap();
        let r = MetricsReport::from_confusion(&cm).unwrap();
        prop_assert_eq!(cm.total(), y.len() as u64);
        for (k, row) in cm.counts.iter().enumerate() {
            prop_assert_eq!(row.iter().sum::<u64>(), y.iter().filter(|&&l| l == k).count() as u64);
        }
        let f1s: Vec<f64> = r.per_class.iter().map(|m| m.f1).collect();
        let lo = f1s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.macro_f1 >= lo - 1e-15 && r.macro_f1 <= hi + 1e-15);
        for v in [r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn confusion_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cm = ConfusionMatrix::new(&[0, 1, 1], &[0, 0, 1], 2).unwrap();
    let path = dir.path().join("confusion.csv");
    cm.write_csv(&path).unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), "true\\pred,0,1\n0,1,0\n1,1,1\n");
}

fn tiny_dataset() -> MultiviewDataset {
    let n = 12;
    let a: Vec<f32> = (0..n * 3).map(|i| ((i * 7) % 3) as f32 - 1.0).collect();
    let b: Vec<f32> = (0..n * 2).map(|i| ((i * 5) % 3) as f32 - 1.0).collect();
    MultiviewDataset::from_views(
        vec![
            ViewMatrix::new(LayerId::Network, n, 3, a).unwrap(),
            ViewMatrix::new(LayerId::Transport, n, 2, b).unwrap(),
        ],
        (0..n).map(|i| i % 2).collect(),
        2,
    )
    .unwrap()
}

fn tiny_model() -> PaccModel {
    let mut cfg = ModelConfig::new(vec![3, 2], 2);
    cfg.latent_dim = 4;
    cfg.encoder_hidden = vec![5];
    cfg.decoder_hidden = vec![5];
    PaccModel::new(cfg, 1).unwrap()
}

#[test]
fn evaluate_is_deterministic_and_checks_input() {
    let ds = tiny_dataset();
    let model = tiny_model();
    let idx: Vec<usize> = (0..12).collect();
    let a = evaluate(&model, &ds, &idx).unwrap();
    let b = evaluate(&model, &ds, &idx).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.confusion.total(), 12);
    assert!(matches!(evaluate(&model, &ds, &[]), Err(EvalError::EmptySplit)));
    let wrong = ds.select_views(&[0]);
    assert!(matches!(evaluate(&model, &wrong, &idx), Err(EvalError::DimMismatch { .. })));
}

#[test]
fn export_embeddings_layout() {
    let ds = tiny_dataset();
    let model = tiny_model();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("emb");
    export_embeddings(&model, &ds, &out).unwrap();
    let back = import_views(&out).unwrap();
    assert_eq!(back.dims(), vec![4, 4]);
    assert_eq!(back.n(), 12);
    assert_eq!(back.labels, ds.labels);
    let w = read_matrix(&out.join("fusion_weights.bin")).unwrap();
    assert_eq!((w.rows, w.cols), (12, 2));
    let f = read_matrix(&out.join("fused.bin")).unwrap();
    assert_eq!((f.rows, f.cols), (12, 8));
}
