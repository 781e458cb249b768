//! The flat JSON training config. Every knob is explicit (no inheritance);
//! unknown keys are rejected so a saved config is a complete, auditable
//! record of what ran.

use atag_core::model::{ModelConfig, Variant};
use atag_core::net::AdamHyper;
use atag_core::train::{MonitorSplit, TrainSpec};
use serde::{Deserialize, Serialize};

fn default_hidden() -> usize {
    100
}
fn default_max_len() -> usize {
    30
}
fn default_dropout() -> f64 {
    0.5
}
fn default_dim() -> usize {
    300
}
fn default_batch_size() -> usize {
    10
}
fn default_max_epochs() -> usize {
    25
}
fn default_patience() -> usize {
    2
}
fn default_runs() -> usize {
    6
}
fn default_monitor() -> String {
    "heldout".to_string()
}
fn default_monitor_fraction() -> f64 {
    0.1
}
fn default_lr() -> f64 {
    1e-3
}
fn default_clip() -> f64 {
    5.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// One of the eight method names, e.g. "WoCh-BiLSTM-CRF".
    pub variant: String,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default)]
    pub embedding_name: String,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// "heldout" (early-stop on a held-out slice of train) or "test".
    #[serde(default = "default_monitor")]
    pub monitor: String,
    #[serde(default = "default_monitor_fraction")]
    pub monitor_fraction: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    #[serde(default)]
    pub constrained_decode: bool,
}

impl TrainConfig {
    pub fn to_model_config(&self) -> Result<ModelConfig, String> {
        let variant = Variant::parse(&self.variant).ok_or_else(|| {
            format!(
                "unknown variant {:?}; expected one of: {}",
                self.variant,
                Variant::ALL.map(|v| v.as_str()).join(", ")
            )
        })?;
        Ok(ModelConfig {
            variant,
            hidden: self.hidden,
            max_len: self.max_len,
            dropout: self.dropout,
            embedding_name: self.embedding_name.clone(),
            seed: self.seed,
            constrained_decode: self.constrained_decode,
        })
    }

    pub fn to_train_spec(&self) -> Result<TrainSpec, String> {
        let monitor = match self.monitor.as_str() {
            "heldout" => MonitorSplit::Heldout { fraction: self.monitor_fraction },
            "test" => MonitorSplit::Test,
            other => return Err(format!("unknown monitor {other:?}; use \"heldout\" or \"test\"")),
        };
        Ok(TrainSpec {
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            runs: self.runs,
            monitor,
            clip_norm: self.clip_norm,
            adam: AdamHyper { lr: self.learning_rate, ..AdamHyper::default() },
        })
    }
}
