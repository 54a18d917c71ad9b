use super::*;
use crate::autograd::{Graph, Mode, Tensor};

fn t(rows: &[Vec<f64>]) -> Tensor {
    Tensor::from_rows(rows).unwrap()
}

fn small_config(view_dims: Vec<usize>, classes: usize, d: usize) -> ModelConfig {
    let mut cfg = ModelConfig::new(view_dims, classes);
    cfg.latent_dim = d;
    cfg.encoder_hidden = vec![6];
    cfg.decoder_hidden = vec![5];
    cfg.scorer_dim = 3;
    cfg.gate_dim = 3;
    cfg.dropout = 0.0;
    cfg
}

fn lcg_tensor(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let data = (0..rows * cols)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
        })
        .collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

#[test]
fn rec_loss_fixtures() {
    let mut g = Graph::new(Mode::Eval);
    let x = g.leaf(t(&[vec![1.0, 0.0], vec![0.0, 2.0]]));
    let same = g.leaf(t(&[vec![3.0, 0.0], vec![0.0, 1.0]]));
    let orth = g.leaf(t(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
    let opp = g.leaf(t(&[vec![-1.0, 0.0], vec![0.0, -5.0]]));
    for (xhat, expected) in [(same, 0.0), (orth, 1.0), (opp, 2.0)] {
        let l = rec_loss(&mut g, x, xhat).unwrap();
        assert!((g.value(l).item() - expected).abs() < 1e-12);
    }
}

#[test]
fn rec_loss_skips_zero_rows() {
    let mut g = Graph::new(Mode::Eval);
    let x = g.leaf(t(&[vec![1.0, 0.0], vec![0.0, 0.0]]));
    let xhat = g.leaf(t(&[vec![-1.0, 0.0], vec![1.0, 1.0]]));
    let l = rec_loss(&mut g, x, xhat).unwrap();
    assert!((g.value(l).item() - 2.0).abs() < 1e-12);

    let z = g.leaf(Tensor::zeros(2, 2));
    assert!(matches!(rec_loss(&mut g, z, xhat), Err(ModelError::AllRowsDegenerate)));
}

#[test]
fn info_nce_constant_scorer_is_minus_log_b() {
    for b in [2usize, 8, 64] {
        let mut g = Graph::new(Mode::Eval);
        let p = g.leaf(Tensor::filled(b, 4, 0.3));
        let q = g.leaf(Tensor::filled(b, 4, 0.3));
        let l = info_nce(&mut g, p, q, 0.1).unwrap();
        assert!((g.value(l).item() + (b as f64).ln()).abs() < 1e-12, "b = {b}");
    }
}

#[test]
fn info_nce_two_row_saturation() {
    let mut g = Graph::new(Mode::Eval);
    let p = g.leaf(t(&[vec![10.0], vec![-10.0]]));
    let q = g.leaf(t(&[vec![10.0], vec![-10.0]]));
    let l = info_nce(&mut g, p, q, 0.1).unwrap();
    // log(1 / (1 + e^-20))
    let expected = -(1.0 + (-20.0f64).exp()).ln();
    assert!((g.value(l).item() - expected).abs() < 1e-15);
    assert!((expected + 2.061153622438558e-9).abs() < 1e-15);
}

#[test]
fn info_nce_rejects_single_row() {
    let mut g = Graph::new(Mode::Eval);
    let p = g.leaf(Tensor::filled(1, 3, 1.0));
    assert!(matches!(info_nce(&mut g, p, p, 0.1), Err(ModelError::BatchTooSmall(1))));
}

#[test]
fn consensus_single_view_is_zero() {
    let mut g = Graph::new(Mode::Eval);
    let p = g.leaf(lcg_tensor(4, 3, 1));
    let l = consensus_loss(&mut g, &[p], 0.1).unwrap();
    assert_eq!(g.value(l).item(), 0.0);
}

#[test]
fn consensus_averages_pairs() {
    let mut g = Graph::new(Mode::Eval);
    let ps: Vec<_> = (0..3).map(|s| g.leaf(lcg_tensor(5, 3, s))).collect();
    let l = consensus_loss(&mut g, &ps, 0.5).unwrap();
    let mut sum = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            let v = info_nce(&mut g, ps[i], ps[j], 0.5).unwrap();
            sum += g.value(v).item();
        }
    }
    assert!((g.value(l).item() + sum / 3.0).abs() < 1e-12);
}

#[test]
fn class_balance_values() {
    assert_eq!(raw_class_balance_weights(&[5, 100], 0.0).unwrap(), vec![1.0, 1.0]);
    let w = raw_class_balance_weights(&[2], 0.5).unwrap();
    assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
    let w = class_balance_weights(&[10, 100, 1000], 0.99).unwrap();
    assert!((w.iter().sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
    assert!(w[0] > w[1] && w[1] > w[2]);
    assert!(matches!(raw_class_balance_weights(&[1], 1.0), Err(ModelError::InvalidBeta(_))));
    assert!(matches!(raw_class_balance_weights(&[3, 0], 0.5), Err(ModelError::EmptyClass(1))));
}

#[test]
fn layer_ce_value() {
    let mut g = Graph::new(Mode::Eval);
    let logits = g.leaf(t(&[vec![2.0, 0.0]]));
    let l = layer_ce(&mut g, &[logits], &[0]).unwrap();
    let expected = (1.0 + (-2.0f64).exp()).ln();
    assert!((g.value(l).item() - expected).abs() < 1e-14);
    assert!((expected - 0.1269280110429725).abs() < 1e-15);
    assert!(matches!(layer_ce(&mut g, &[logits], &[2]), Err(ModelError::LabelOutOfRange { label: 2, classes: 2 })));
}

#[test]
fn global_ce_applies_class_weights() {
    let mut g = Graph::new(Mode::Eval);
    let logits = g.leaf(t(&[vec![2.0, 0.0], vec![2.0, 0.0]]));
    let l = global_ce(&mut g, logits, &[0, 1], &[1.0, 3.0]).unwrap();
    let a = (1.0 + (-2.0f64).exp()).ln();
    let b = (1.0 + 2.0f64.exp()).ln();
    assert!((g.value(l).item() - (a + 3.0 * b) / 2.0).abs() < 1e-12);
}

#[test]
fn fusion_weights_simplex_and_shift() {
    let s = t(&[vec![0.1, -2.0, 3.0], vec![1.0, 1.0, 1.0]]);
    let mut g = Graph::new(Mode::Eval);
    let sv = g.leaf(s.clone());
    let w = fusion_weights(&mut g, sv, 1.0).unwrap();
    let shifted = g.leaf(s.map(|v| v + 7.5));
    let w2 = fusion_weights(&mut g, shifted, 1.0).unwrap();
    let (w, w2) = (g.value(w).clone(), g.value(w2).clone());
    for r in 0..2 {
        assert!((w.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.row(r).iter().all(|&v| v >= 0.0));
    }
    assert!(w.max_abs_diff(&w2) < 1e-12);
    let sharp = g.leaf(s);
    let ws = fusion_weights(&mut g, sharp, 1e-3).unwrap();
    assert!(g.value(ws).get(0, 2) > 0.99);
}

#[test]
fn fuse_scales_blocks() {
    let mut g = Graph::new(Mode::Eval);
    let z1 = g.leaf(t(&[vec![1.0, 2.0]]));
    let z2 = g.leaf(t(&[vec![3.0, 4.0]]));
    let w = g.leaf(t(&[vec![0.25, 0.75]]));
    let f = fuse(&mut g, &[z1, z2], w).unwrap();
    assert_eq!(g.value(f).data(), &[0.25, 0.5, 2.25, 3.0]);
    let w_one = g.leaf(t(&[vec![1.0, 0.0]]));
    let f = fuse(&mut g, &[z1, z2], w_one).unwrap();
    assert_eq!(g.value(f).data(), &[1.0, 2.0, 0.0, 0.0]);
}

#[test]
fn fusion_scores_uncertainty_term() {
    let mut g = Graph::new(Mode::Eval);
    let z = g.leaf(Tensor::filled(2, 3, 0.0));
    let gate = GateVars {
        wf: g.leaf(Tensor::zeros(3, 2)),
        h1_w: g.leaf(Tensor::zeros(2, 2)),
        h1_b: g.leaf(Tensor::zeros(1, 2)),
        h2_w: g.leaf(Tensor::zeros(2, 1)),
        h2_b: g.leaf(Tensor::zeros(1, 1)),
    };
    let lp = g.leaf(t(&[vec![0.5f64.ln(), 0.5f64.ln()], vec![0.0, -40.0]]));
    let s = fusion_scores(&mut g, &[z], &[lp], &gate, 1.0, 1.0).unwrap();
    let v = g.value(s);
    assert!((v.get(0, 0) - 0.5f64.ln()).abs() < 1e-12);
    assert!(v.get(1, 0).abs() < 1e-15);
}

fn toy_batch(cfg: &ModelConfig, b: usize) -> Batch {
    Batch {
        views: cfg.view_dims.iter().enumerate().map(|(i, &d)| lcg_tensor(b, d, 10 + i as u64)).collect(),
        labels: (0..b).map(|r| r % cfg.class_count).collect(),
    }
}

#[test]
fn breakdown_sums_to_total_and_respects_flags() {
    let cfg = small_config(vec![7, 5, 4], 3, 4);
    let batch = toy_batch(&cfg, 6);
    let cw = vec![1.0; 3];
    let model = PaccModel::new(cfg.clone(), 3).unwrap();
    let bd = model.evaluate_loss(&batch, &cw, Mode::Eval, 0, 0).unwrap();
    let sum = bd.rec + bd.consensus + bd.layer_ce + bd.global_ce;
    assert!((sum - bd.total).abs() < 1e-12);
    assert_eq!(bd.rec_per_layer.len(), 3);

    let mut off = cfg;
    off.objective.terms.rec = false;
    off.objective.terms.con = false;
    let model_off = PaccModel::new(off, 3).unwrap();
    let bd_off = model_off.evaluate_loss(&batch, &cw, Mode::Eval, 0, 0).unwrap();
    assert_eq!(bd_off.rec, 0.0);
    assert_eq!(bd_off.consensus, 0.0);
    assert!((bd_off.total - bd_off.layer_ce - bd_off.global_ce).abs() < 1e-12);
    assert!((bd_off.global_ce - bd.global_ce).abs() < 1e-12);
}

#[test]
fn gradients_reach_every_group() {
    let cfg = small_config(vec![7, 5], 3, 4);
    let model = PaccModel::new(cfg.clone(), 11).unwrap();
    let batch = toy_batch(&cfg, 6);
    let (_, grads) = model.loss_and_grads(&batch, &[1.0; 3], Mode::Train, 1, 0).unwrap();
    for (name, ids) in model.param_groups() {
        let norm: f64 = ids.iter().map(|id| grads[id.index()].data().iter().map(|v| v * v).sum::<f64>()).sum();
        assert!(norm > 0.0, "{name} received no gradient");
    }
}

#[test]
fn disabled_terms_leave_decoders_untouched() {
    let mut cfg = small_config(vec![7, 5], 3, 4);
    cfg.objective.terms.rec = false;
    let model = PaccModel::new(cfg.clone(), 11).unwrap();
    let (_, grads) = model.loss_and_grads(&toy_batch(&cfg, 6), &[1.0; 3], Mode::Train, 1, 0).unwrap();
    let (_, dec) = &model.param_groups()[1];
    assert!(dec.iter().all(|id| grads[id.index()].data().iter().all(|&v| v == 0.0)));
}

#[test]
fn finite_difference_full_objective() {
    let mut cfg = small_config(vec![12, 12, 12], 3, 4);
    cfg.encoder_hidden = vec![5];
    cfg.decoder_hidden = vec![5];
    let model = PaccModel::new(cfg.clone(), 5).unwrap();
    let batch = toy_batch(&cfg, 8);
    let cw = class_balance_weights(&[3, 3, 2], 0.9).unwrap();
    let (_, grads) = model.loss_and_grads(&batch, &cw, Mode::Eval, 0, 0).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for id in model.params.ids() {
        let n = model.params.get(id).len();
        // Probe a spread of entries in every tensor.
        let stride = (n / 7).max(1);
        for k in (0..n).step_by(stride) {
            let mut plus = model.clone();
            plus.params.get_mut(id).data_mut()[k] += h;
            let mut minus = model.clone();
            minus.params.get_mut(id).data_mut()[k] -= h;
            let fp = plus.evaluate_loss(&batch, &cw, Mode::Eval, 0, 0).unwrap().total;
            let fm = minus.evaluate_loss(&batch, &cw, Mode::Eval, 0, 0).unwrap().total;
            let numeric = (fp - fm) / (2.0 * h);
            let analytic = grads[id.index()].data()[k];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
            let err = if (numeric - analytic).abs() < 1e-8 { 0.0 } else { rel };
            worst = worst.max(err);
            assert!(err < 1e-4, "{} [{k}]: numeric {numeric} analytic {analytic}", model.params.name(id));
        }
    }
    assert!(worst < 1e-4);
}

#[test]
fn zero_model_predicts_uniform() {
    let cfg = small_config(vec![4, 3], 4, 2);
    let mut model = PaccModel::new(cfg.clone(), 0).unwrap();
    for v in model.params.values_mut() {
        v.data_mut().iter_mut().for_each(|x| *x = 0.0);
    }
    let pred = model.predict(&toy_batch(&cfg, 5).views).unwrap();
    assert!(pred.probs.data().iter().all(|&p| (p - 0.25).abs() < 1e-12));
    assert!(pred.weights.data().iter().all(|&w| (w - 0.5).abs() < 1e-12));
    assert_eq!(pred.classes, vec![0; 5]);
}

#[test]
fn predict_checks_shapes() {
    let cfg = small_config(vec![4, 3], 2, 2);
    let model = PaccModel::new(cfg, 0).unwrap();
    assert!(matches!(model.predict(&[Tensor::zeros(2, 4)]), Err(ModelError::ShapeMismatch { .. })));
    assert!(matches!(
        model.predict(&[Tensor::zeros(2, 4), Tensor::zeros(2, 5)]),
        Err(ModelError::ShapeMismatch { .. })
    ));
}

#[test]
fn predict_chunks_match_single_pass() {
    let cfg = small_config(vec![3, 2], 3, 2);
    let model = PaccModel::new(cfg.clone(), 4).unwrap();
    let batch = toy_batch(&cfg, 2100);
    let full = model.predict(&batch.views).unwrap();
    let idx: Vec<usize> = (2000..2100).collect();
    let part = model.predict(&batch.views.iter().map(|v| v.select_rows(&idx)).collect::<Vec<_>>()).unwrap();
    assert_eq!(full.probs.select_rows(&idx), part.probs);
    assert_eq!(full.probs.rows(), 2100);
    assert_eq!(full.fused.cols(), 4);
}

#[test]
fn checkpoint_round_trip_predicts_identically() {
    let cfg = small_config(vec![5, 4], 3, 3);
    let model = PaccModel::new(cfg.clone(), 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    model.save(&path, serde_json::json!({"epoch": 4})).unwrap();
    let (loaded, meta) = PaccModel::load(&path).unwrap();
    assert_eq!(meta["epoch"], 4);
    assert_eq!(loaded.config, cfg);
    let views = toy_batch(&cfg, 9).views;
    assert_eq!(model.predict(&views).unwrap(), loaded.predict(&views).unwrap());
}

#[test]
fn same_seed_same_init() {
    let cfg = small_config(vec![5, 4], 3, 3);
    let a = PaccModel::new(cfg.clone(), 8).unwrap();
    let b = PaccModel::new(cfg.clone(), 8).unwrap();
    let c = PaccModel::new(cfg, 9).unwrap();
    assert_eq!(a.params.values(), b.params.values());
    assert_ne!(a.params.values(), c.params.values());
}
