use serde::{Deserialize, Serialize};

use super::{SplitMode, TrainError};
use crate::model::{ModelConfig, Objective};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub beta_cb: f64,
    pub split_mode: SplitMode,
    pub latent_dim: usize,
    pub dropout: f64,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub scorer_dim: usize,
    pub gate_dim: usize,
    pub tau_nce: f64,
    pub tau_fuse: f64,
    pub lambda_proj: f64,
    pub lambda_unc: f64,
    /// Ablation switches and per-term multipliers.
    pub objective: Objective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let m = ModelConfig::new(Vec::new(), 0);
        Self {
            seed: 0,
            batch_size: 64,
            lr: 1e-3,
            epochs: 100,
            patience: 10,
            beta_cb: 0.99,
            split_mode: SplitMode::EightOneOne,
            latent_dim: m.latent_dim,
            dropout: m.dropout,
            encoder_hidden: m.encoder_hidden,
            decoder_hidden: m.decoder_hidden,
            scorer_dim: m.scorer_dim,
            gate_dim: m.gate_dim,
            tau_nce: m.tau_nce,
            tau_fuse: m.tau_fuse,
            lambda_proj: m.lambda_proj,
            lambda_unc: m.lambda_unc,
            objective: m.objective,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta_cb) {
            return bad("beta_cb must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn model_config(&self, view_dims: Vec<usize>, class_count: usize) -> ModelConfig {
        ModelConfig {
            view_dims,
            class_count,
            latent_dim: self.latent_dim,
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
            dropout: self.dropout,
            scorer_dim: self.scorer_dim,
            gate_dim: self.gate_dim,
            tau_nce: self.tau_nce,
            tau_fuse: self.tau_fuse,
            lambda_proj: self.lambda_proj,
            lambda_unc: self.lambda_unc,
            objective: self.objective,
        }
    }
}
