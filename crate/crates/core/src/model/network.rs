use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{consensus_loss, fuse, fusion_scores, fusion_weights, global_ce, layer_ce, rec_loss, GateVars};
use super::{ModelConfig, ModelError};
use crate::autograd::{
    read_checkpoint, softmax_rows, write_checkpoint, Checkpoint, Graph, Mode, ParamId, ParamStore, Tensor, Var,
};

/// Rows per forward pass in [`PaccModel::predict`].
const PREDICT_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

impl Dense {
    fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = store.add_glorot(format!("{name}.w"), fan_in, fan_out, rng);
        let b = store.add_zeros(format!("{name}.b"), 1, fan_out);
        Self { w, b }
    }

    fn apply(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var, ModelError> {
        let h = g.matmul(x, p[self.w.index()])?;
        Ok(g.add_bias(h, p[self.b.index()])?)
    }
}

#[derive(Clone, Debug)]
struct ViewParams {
    encoder: Vec<Dense>,
    decoder: Vec<Dense>,
    head: Dense,
}

/// Parameters and structure of the full network.
#[derive(Clone, Debug)]
pub struct PaccModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    views: Vec<ViewParams>,
    scorer: Dense,
    gate_wf: ParamId,
    gate_h1: Dense,
    gate_h2: Dense,
    global: Dense,
}

/// One minibatch: a matrix per view plus labels.
#[derive(Clone, Debug)]
pub struct Batch {
    pub views: Vec<Tensor>,
    pub labels: Vec<usize>,
}

/// Graph handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub latents: Vec<Var>,
    pub reconstructions: Vec<Var>,
    pub projections: Vec<Var>,
    pub layer_logits: Vec<Var>,
    pub layer_log_probs: Vec<Var>,
    pub scores: Var,
    pub weights: Var,
    pub fused: Var,
    pub global_logits: Var,
}

/// Weighted objective terms; disabled terms are 0 and the fields sum to `total`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Unweighted cosine distance per layer, reported even when the term is off.
    pub rec_per_layer: Vec<f64>,
    pub rec: f64,
    pub consensus: f64,
    pub layer_ce: f64,
    pub global_ce: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    /// Global-head class probabilities, N × C.
    pub probs: Tensor,
    pub layer_probs: Vec<Tensor>,
    /// Fusion weights, N × M.
    pub weights: Tensor,
    /// N × (M·D).
    pub fused: Tensor,
    pub latents: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointConfig {
    model: ModelConfig,
    #[serde(default)]
    meta: serde_json::Value,
}

impl PaccModel {
    /// Glorot weights and zero biases, drawn in a fixed order from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.latent_dim;
        let mut views = Vec::with_capacity(config.m());
        for (i, &d_f) in config.view_dims.iter().enumerate() {
            let mut widths = vec![d_f];
            widths.extend(&config.encoder_hidden);
            widths.push(d);
            let encoder = widths
                .windows(2)
                .enumerate()
                .map(|(l, w)| Dense::new(&mut store, &format!("view{i}.enc{l}"), w[0], w[1], &mut rng))
                .collect();
            let mut widths = vec![d];
            widths.extend(&config.decoder_hidden);
            widths.push(d_f);
            let decoder = widths
                .windows(2)
                .enumerate()
                .map(|(l, w)| Dense::new(&mut store, &format!("view{i}.dec{l}"), w[0], w[1], &mut rng))
                .collect();
            let head = Dense::new(&mut store, &format!("view{i}.head"), d, config.class_count, &mut rng);
            views.push(ViewParams { encoder, decoder, head });
        }
        let scorer = Dense::new(&mut store, "scorer", d, config.scorer_dim, &mut rng);
        let gate_wf = store.add_glorot("gate.wf", d, config.gate_dim, &mut rng);
        let gate_h1 = Dense::new(&mut store, "gate.h1", config.gate_dim, config.gate_dim, &mut rng);
        let gate_h2 = Dense::new(&mut store, "gate.h2", config.gate_dim, 1, &mut rng);
        let global = Dense::new(&mut store, "global", config.m() * d, config.class_count, &mut rng);
        Ok(Self { config, params: store, views, scorer, gate_wf, gate_h1, gate_h2, global })
    }

    pub fn m(&self) -> usize {
        self.config.m()
    }

    /// Inserts every parameter as a leaf; the result is indexed by `ParamId::index`.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params.values().iter().map(|t| g.leaf(t.clone())).collect()
    }

    /// Parameter ids grouped by component: encoders, decoders, heads, scorer, gate, global head.
    pub fn param_groups(&self) -> Vec<(&'static str, Vec<ParamId>)> {
        let both = |d: &Dense| [d.w, d.b];
        vec![
            ("encoders", self.views.iter().flat_map(|v| v.encoder.iter().flat_map(both)).collect()),
            ("decoders", self.views.iter().flat_map(|v| v.decoder.iter().flat_map(both)).collect()),
            ("heads", self.views.iter().flat_map(|v| both(&v.head)).collect()),
            ("scorer", both(&self.scorer).to_vec()),
            ("gate", [self.gate_wf].into_iter().chain(both(&self.gate_h1)).chain(both(&self.gate_h2)).collect()),
            ("global", both(&self.global).to_vec()),
        ]
    }

    fn check_inputs(&self, views: &[Tensor]) -> Result<usize, ModelError> {
        if views.len() != self.m() {
            return Err(ModelError::ShapeMismatch {
                expected: format!("{} views", self.m()),
                found: views.len().to_string(),
            });
        }
        let rows = views[0].rows();
        for (i, (v, &d)) in views.iter().zip(&self.config.view_dims).enumerate() {
            if v.cols() != d || v.rows() != rows {
                return Err(ModelError::ShapeMismatch {
                    expected: format!("view {i} of shape [{rows}, {d}]"),
                    found: format!("{:?}", v.shape()),
                });
            }
        }
        Ok(rows)
    }

    /// Latent codes only.
    pub fn encode(&self, g: &mut Graph, p: &[Var], x: &[Var]) -> Result<Vec<Var>, ModelError> {
        let mut out = Vec::with_capacity(x.len());
        for (vp, &xi) in self.views.iter().zip(x) {
            let mut h = xi;
            let last = vp.encoder.len() - 1;
            for (l, layer) in vp.encoder.iter().enumerate() {
                h = layer.apply(g, p, h)?;
                if l < last {
                    h = g.tanh(h);
                    h = g.dropout(h, self.config.dropout)?;
                }
            }
            out.push(h);
        }
        Ok(out)
    }

    /// Full forward pass. With `aux = false` the decoders and scorer are skipped.
    pub fn forward(&self, g: &mut Graph, p: &[Var], x: &[Var], aux: bool) -> Result<ForwardOutput, ModelError> {
        let latents = self.encode(g, p, x)?;
        let mut reconstructions = Vec::new();
        let mut projections = Vec::new();
        if aux {
            for (vp, &z) in self.views.iter().zip(&latents) {
                let mut h = z;
                let last = vp.decoder.len() - 1;
                for (l, layer) in vp.decoder.iter().enumerate() {
                    h = layer.apply(g, p, h)?;
                    if l < last {
                        h = g.tanh(h);
                    }
                }
                reconstructions.push(h);
                let s = self.scorer.apply(g, p, z)?;
                projections.push(g.tanh(s));
            }
        }
        let mut layer_logits = Vec::with_capacity(self.m());
        let mut layer_log_probs = Vec::with_capacity(self.m());
        for (vp, &z) in self.views.iter().zip(&latents) {
            let logits = vp.head.apply(g, p, z)?;
            layer_log_probs.push(g.log_softmax(logits, 1.0)?);
            layer_logits.push(logits);
        }
        let gate = GateVars {
            wf: p[self.gate_wf.index()],
            h1_w: p[self.gate_h1.w.index()],
            h1_b: p[self.gate_h1.b.index()],
            h2_w: p[self.gate_h2.w.index()],
            h2_b: p[self.gate_h2.b.index()],
        };
        let scores =
            fusion_scores(g, &latents, &layer_log_probs, &gate, self.config.lambda_proj, self.config.lambda_unc)?;
        let weights = fusion_weights(g, scores, self.config.tau_fuse)?;
        let fused = fuse(g, &latents, weights)?;
        let global_logits = self.global.apply(g, p, fused)?;
        Ok(ForwardOutput {
            latents,
            reconstructions,
            projections,
            layer_logits,
            layer_log_probs,
            scores,
            weights,
            fused,
            global_logits,
        })
    }

    /// Builds the combined objective for one batch.
    pub fn total_loss(
        &self,
        g: &mut Graph,
        p: &[Var],
        batch: &Batch,
        class_weights: &[f64],
    ) -> Result<(Var, LossBreakdown, ForwardOutput), ModelError> {
        self.check_inputs(&batch.views)?;
        let x: Vec<Var> = batch.views.iter().map(|t| g.leaf(t.clone())).collect();
        let out = self.forward(g, p, &x, true)?;
        let obj = self.config.objective;
        let mut parts: Vec<Var> = Vec::new();
        let mut bd = LossBreakdown::default();

        let mut recs = Vec::with_capacity(self.m());
        for (&xi, &ri) in x.iter().zip(&out.reconstructions) {
            let r = rec_loss(g, xi, ri)?;
            bd.rec_per_layer.push(g.value(r).item());
            recs.push(r);
        }
        if obj.terms.rec {
            let all = g.concat(&recs)?;
            let total = g.sum(all);
            let term = g.scale(total, obj.weights.rec / self.m() as f64);
            bd.rec = g.value(term).item();
            parts.push(term);
        }
        if obj.terms.con {
            let c = consensus_loss(g, &out.projections, self.config.tau_nce)?;
            let term = g.scale(c, obj.weights.con);
            bd.consensus = g.value(term).item();
            parts.push(term);
        }
        if obj.terms.task_info {
            let c = layer_ce(g, &out.layer_logits, &batch.labels)?;
            let term = g.scale(c, obj.weights.task_info);
            bd.layer_ce = g.value(term).item();
            parts.push(term);
        }
        if obj.terms.global_ce {
            let c = global_ce(g, out.global_logits, &batch.labels, class_weights)?;
            let term = g.scale(c, obj.weights.global_ce);
            bd.global_ce = g.value(term).item();
            parts.push(term);
        }
        let total = match parts.len() {
            0 => g.leaf(Tensor::scalar(0.0)),
            1 => parts[0],
            _ => {
                let all = g.concat(&parts)?;
                g.sum(all)
            }
        };
        bd.total = g.value(total).item();
        Ok((total, bd, out))
    }

    /// Objective value and one gradient per parameter (in store order).
    pub fn loss_and_grads(
        &self,
        batch: &Batch,
        class_weights: &[f64],
        mode: Mode,
        seed: u64,
        step: u64,
    ) -> Result<(LossBreakdown, Vec<Tensor>), ModelError> {
        let mut g = Graph::with_seed(mode, seed, step);
        let p = self.bind(&mut g);
        let (total, bd, _) = self.total_loss(&mut g, &p, batch, class_weights)?;
        let grads = g.backward(total)?;
        Ok((bd, p.iter().map(|&v| grads.wrt(&g, v)).collect()))
    }

    /// Objective value without gradients.
    pub fn evaluate_loss(&self, batch: &Batch, class_weights: &[f64], mode: Mode, seed: u64, step: u64) -> Result<LossBreakdown, ModelError> {
        let mut g = Graph::with_seed(mode, seed, step);
        let p = self.bind(&mut g);
        Ok(self.total_loss(&mut g, &p, batch, class_weights)?.1)
    }

    /// Eval-mode inference; argmax ties go to the lowest class index.
    pub fn predict(&self, views: &[Tensor]) -> Result<Prediction, ModelError> {
        let n = self.check_inputs(views)?;
        let m = self.m();
        let mut probs = Vec::new();
        let mut layer_probs: Vec<Vec<Tensor>> = vec![Vec::new(); m];
        let mut latents: Vec<Vec<Tensor>> = vec![Vec::new(); m];
        let mut weights = Vec::new();
        let mut fused = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + PREDICT_CHUNK).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let mut g = Graph::new(Mode::Eval);
            let p = self.bind(&mut g);
            let x: Vec<Var> = views.iter().map(|v| g.leaf(v.select_rows(&idx))).collect();
            let out = self.forward(&mut g, &p, &x, false)?;
            probs.push(softmax_rows(g.value(out.global_logits), 1.0));
            for i in 0..m {
                layer_probs[i].push(g.value(out.layer_log_probs[i]).map(f64::exp));
                latents[i].push(g.value(out.latents[i]).clone());
            }
            weights.push(g.value(out.weights).clone());
            fused.push(g.value(out.fused).clone());
            start = end;
        }
        let vcat = |parts: Vec<Tensor>, cols: usize| -> Tensor {
            let mut data = Vec::new();
            for t in parts {
                data.extend_from_slice(t.data());
            }
            Tensor::from_vec(data.len() / cols.max(1), cols, data).expect("row blocks share width")
        };
        let c = self.config.class_count;
        let d = self.config.latent_dim;
        let probs = if n == 0 { Tensor::zeros(0, c) } else { vcat(probs, c) };
        let classes = (0..probs.rows())
            .map(|r| {
                probs.row(r).iter().enumerate().fold(0, |best, (j, &v)| if v > probs.get(r, best) { j } else { best })
            })
            .collect();
        let fix = |parts: Vec<Tensor>, cols: usize| if n == 0 { Tensor::zeros(0, cols) } else { vcat(parts, cols) };
        Ok(Prediction {
            classes,
            probs,
            layer_probs: layer_probs.into_iter().map(|p| fix(p, c)).collect(),
            weights: fix(weights, m),
            fused: fix(fused, m * d),
            latents: latents.into_iter().map(|p| fix(p, d)).collect(),
        })
    }

    pub fn to_checkpoint(&self, meta: serde_json::Value) -> Result<Checkpoint, ModelError> {
        let config_json = serde_json::to_string(&CheckpointConfig { model: self.config.clone(), meta })?;
        Ok(Checkpoint { params: self.params.clone(), config_json })
    }

    /// Rebuilds the structure from the embedded configuration and loads the values.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, serde_json::Value), ModelError> {
        let cfg: CheckpointConfig = serde_json::from_str(&ckpt.config_json)?;
        let mut model = Self::new(cfg.model, 0)?;
        model.params.load_from(&ckpt.params).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        Ok((model, cfg.meta))
    }

    pub fn save(&self, path: &Path, meta: serde_json::Value) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        write_checkpoint(&mut w, &self.to_checkpoint(meta)?)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value), ModelError> {
        let mut r = BufReader::new(File::open(path)?);
        let ckpt = read_checkpoint(&mut r)?;
        Self::from_checkpoint(&ckpt)
    }
}
