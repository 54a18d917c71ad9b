//! Loss terms and fusion pieces expressed as graph operations.

use super::ModelError;
use crate::autograd::{Graph, Tensor, Var, NORM_EPS};

fn row_norms(t: &Tensor) -> Vec<f64> {
    (0..t.rows()).map(|r| t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

fn check_labels(y: &[usize], rows: usize, classes: usize) -> Result<(), ModelError> {
    if y.len() != rows {
        return Err(ModelError::ShapeMismatch { expected: format!("{rows} labels"), found: format!("{}", y.len()) });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= classes) {
        return Err(ModelError::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean cosine distance `1 − cos(x, x̂)` over rows. Rows where either side
/// has zero norm are left out of the mean (and counted by the graph).
pub fn rec_loss(g: &mut Graph, x: Var, xhat: Var) -> Result<Var, ModelError> {
    let (tx, th) = (g.value(x), g.value(xhat));
    if tx.shape() != th.shape() {
        return Err(ModelError::ShapeMismatch {
            expected: format!("{:?}", tx.shape()),
            found: format!("{:?}", th.shape()),
        });
    }
    let valid: Vec<f64> = row_norms(tx)
        .iter()
        .zip(row_norms(th))
        .map(|(&a, b)| if a < NORM_EPS || b < NORM_EPS { 0.0 } else { 1.0 })
        .collect();
    let count = valid.iter().sum::<f64>();
    if count == 0.0 {
        return Err(ModelError::AllRowsDegenerate);
    }
    let cos = g.cosine_rows(x, xhat)?;
    let neg = g.scale(cos, -1.0);
    let dist = g.add_scalar(neg, 1.0);
    let mask = g.leaf(Tensor::column(&valid));
    let kept = g.mul(dist, mask)?;
    let total = g.sum(kept);
    Ok(g.scale(total, 1.0 / count))
}

/// In-batch InfoNCE bound between already-projected rows: row `i` of `pi`
/// and row `i` of `pj` are the positive pair, the other rows of `pj` the
/// negatives. Scores are cosine similarities divided by `tau`.
pub fn info_nce(g: &mut Graph, pi: Var, pj: Var, tau: f64) -> Result<Var, ModelError> {
    let b = g.value(pi).rows();
    if b < 2 {
        return Err(ModelError::BatchTooSmall(b));
    }
    let ni = g.row_l2_normalize(pi);
    let nj = g.row_l2_normalize(pj);
    let scores = g.matmul_t(ni, nj)?;
    let log_ratio = g.log_softmax(scores, tau)?;
    let diag: Vec<usize> = (0..b).collect();
    let pos = g.gather(log_ratio, &diag)?;
    Ok(g.mean(pos))
}

/// `−2 / (M(M−1)) Σ_{i<j} I_lb(i, j)`, and 0 for a single view.
pub fn consensus_loss(g: &mut Graph, projections: &[Var], tau: f64) -> Result<Var, ModelError> {
    let m = projections.len();
    if m < 2 {
        return Ok(g.leaf(Tensor::scalar(0.0)));
    }
    let mut terms = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            terms.push(info_nce(g, projections[i], projections[j], tau)?);
        }
    }
    let all = g.concat(&terms)?;
    let total = g.sum(all);
    Ok(g.scale(total, -2.0 / (m * (m - 1)) as f64))
}

/// Per-sample cross-entropy as an `n x 1` column.
fn ce_column(g: &mut Graph, logits: Var, y: &[usize]) -> Result<Var, ModelError> {
    let [rows, classes] = g.value(logits).shape();
    check_labels(y, rows, classes)?;
    let lp = g.log_softmax(logits, 1.0)?;
    let picked = g.gather(lp, y)?;
    Ok(g.scale(picked, -1.0))
}

/// Mean over layers of each layer head's mean cross-entropy.
pub fn layer_ce(g: &mut Graph, logits: &[Var], y: &[usize]) -> Result<Var, ModelError> {
    if logits.is_empty() {
        return Ok(g.leaf(Tensor::scalar(0.0)));
    }
    let mut means = Vec::with_capacity(logits.len());
    for &l in logits {
        let ce = ce_column(g, l, y)?;
        means.push(g.mean(ce));
    }
    let all = g.concat(&means)?;
    let total = g.sum(all);
    Ok(g.scale(total, 1.0 / logits.len() as f64))
}

/// Parameters of the fusion gate, bound into a graph.
#[derive(Clone, Copy, Debug)]
pub struct GateVars {
    /// D × D_g projection.
    pub wf: Var,
    pub h1_w: Var,
    pub h1_b: Var,
    /// D_g × 1.
    pub h2_w: Var,
    pub h2_b: Var,
}

/// `S = λ1 · h(tanh(Z W_f)) + λ2 · Σ_c p log p`, one column per layer.
pub fn fusion_scores(
    g: &mut Graph,
    z: &[Var],
    log_probs: &[Var],
    gate: &GateVars,
    lambda_proj: f64,
    lambda_unc: f64,
) -> Result<Var, ModelError> {
    if z.len() != log_probs.len() {
        return Err(ModelError::ShapeMismatch {
            expected: format!("{} probability blocks", z.len()),
            found: format!("{}", log_probs.len()),
        });
    }
    let mut cols = Vec::with_capacity(z.len());
    for (&zi, &lp) in z.iter().zip(log_probs) {
        let proj = g.matmul(zi, gate.wf)?;
        let proj = g.tanh(proj);
        let h1 = g.matmul(proj, gate.h1_w)?;
        let h1 = g.add_bias(h1, gate.h1_b)?;
        let h1 = g.tanh(h1);
        let h2 = g.matmul(h1, gate.h2_w)?;
        let h2 = g.add_bias(h2, gate.h2_b)?;
        let s_proj = g.tanh(h2);
        let p = g.exp(lp);
        let plogp = g.mul(p, lp)?;
        let s_unc = g.sum_rows(plogp);
        let a = g.scale(s_proj, lambda_proj);
        let b = g.scale(s_unc, lambda_unc);
        cols.push(g.add(a, b)?);
    }
    Ok(g.concat(&cols)?)
}

/// Row-wise `softmax(S / tau)`.
pub fn fusion_weights(g: &mut Graph, scores: Var, tau: f64) -> Result<Var, ModelError> {
    Ok(g.softmax(scores, tau)?)
}

/// `[w_1 Z_1, …, w_M Z_M]` with per-row weights.
pub fn fuse(g: &mut Graph, z: &[Var], weights: Var) -> Result<Var, ModelError> {
    let m = g.value(weights).cols();
    if m != z.len() {
        return Err(ModelError::ShapeMismatch { expected: format!("{} weight columns", z.len()), found: m.to_string() });
    }
    let mut blocks = Vec::with_capacity(m);
    for (i, &zi) in z.iter().enumerate() {
        let w = g.col(weights, i)?;
        blocks.push(g.mul_col(zi, w)?);
    }
    Ok(g.concat(&blocks)?)
}

/// `λ_c = (1 − β) / (1 − β^{n_c})`.
pub fn raw_class_balance_weights(counts: &[usize], beta: f64) -> Result<Vec<f64>, ModelError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(ModelError::InvalidBeta(beta));
    }
    counts
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            if n == 0 {
                return Err(ModelError::EmptyClass(c));
            }
            Ok((1.0 - beta) / (1.0 - beta.powi(n.min(i32::MAX as usize) as i32)))
        })
        .collect()
}

/// Class-balance weights rescaled to mean 1.
pub fn class_balance_weights(counts: &[usize], beta: f64) -> Result<Vec<f64>, ModelError> {
    let raw = raw_class_balance_weights(counts, beta)?;
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.iter().map(|w| w / mean).collect())
}

/// Mean over the batch of `λ_{y_n} · CE_n`.
pub fn global_ce(g: &mut Graph, logits: Var, y: &[usize], class_weights: &[f64]) -> Result<Var, ModelError> {
    let classes = g.value(logits).cols();
    if class_weights.len() != classes {
        return Err(ModelError::ShapeMismatch {
            expected: format!("{classes} class weights"),
            found: class_weights.len().to_string(),
        });
    }
    let ce = ce_column(g, logits, y)?;
    let per_row: Vec<f64> = y.iter().map(|&c| class_weights[c]).collect();
    let w = g.leaf(Tensor::column(&per_row));
    let weighted = g.mul(ce, w)?;
    Ok(g.mean(weighted))
}
