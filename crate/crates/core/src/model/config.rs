use serde::{Deserialize, Serialize};

use super::ModelError;

/// Which objective terms are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossTerms {
    pub rec: bool,
    pub con: bool,
    /// Per-layer cross-entropy.
    pub task_info: bool,
    pub global_ce: bool,
}

impl Default for LossTerms {
    fn default() -> Self {
        Self { rec: true, con: true, task_info: true, global_ce: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub rec: f64,
    pub con: f64,
    pub task_info: f64,
    pub global_ce: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { rec: 1.0, con: 1.0, task_info: 1.0, global_ce: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Objective {
    pub terms: LossTerms,
    pub weights: LossWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Input width of each view.
    pub view_dims: Vec<usize>,
    pub class_count: usize,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    #[serde(default = "default_encoder_hidden")]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "default_decoder_hidden")]
    pub decoder_hidden: Vec<usize>,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_scorer")]
    pub scorer_dim: usize,
    #[serde(default = "default_gate")]
    pub gate_dim: usize,
    #[serde(default = "default_tau_nce")]
    pub tau_nce: f64,
    #[serde(default = "one")]
    pub tau_fuse: f64,
    #[serde(default = "one")]
    pub lambda_proj: f64,
    #[serde(default = "one")]
    pub lambda_unc: f64,
    #[serde(default)]
    pub objective: Objective,
}

fn default_latent() -> usize {
    128
}
fn default_encoder_hidden() -> Vec<usize> {
    vec![512, 256]
}
fn default_decoder_hidden() -> Vec<usize> {
    vec![256]
}
fn default_dropout() -> f64 {
    0.5
}
fn default_scorer() -> usize {
    64
}
fn default_gate() -> usize {
    32
}
fn default_tau_nce() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn new(view_dims: Vec<usize>, class_count: usize) -> Self {
        Self {
            view_dims,
            class_count,
            latent_dim: default_latent(),
            encoder_hidden: default_encoder_hidden(),
            decoder_hidden: default_decoder_hidden(),
            dropout: default_dropout(),
            scorer_dim: default_scorer(),
            gate_dim: default_gate(),
            tau_nce: default_tau_nce(),
            tau_fuse: 1.0,
            lambda_proj: 1.0,
            lambda_unc: 1.0,
            objective: Objective::default(),
        }
    }

    pub fn m(&self) -> usize {
        self.view_dims.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.view_dims.is_empty() {
            return bad("at least one view is required");
        }
        if self.view_dims.contains(&0) {
            return bad("view widths must be positive");
        }
        if self.class_count < 2 {
            return bad("at least two classes are required");
        }
        if self.latent_dim == 0 || self.scorer_dim == 0 || self.gate_dim == 0 {
            return bad("latent, scorer and gate widths must be positive");
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.tau_nce > 0.0 && self.tau_fuse > 0.0) {
            return bad("temperatures must be positive");
        }
        Ok(())
    }
}
