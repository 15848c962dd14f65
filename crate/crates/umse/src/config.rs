//! Run configuration: a flat JSON object whose keys mirror the command-line
//! flags. Unknown keys are rejected; flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use umse_core::model::{FusionMethod, ModelConfig, SrPrefixOrder};
use umse_core::training::{AdamWConfig, Mixing, TrainConfig, TrainMode};
use umse_core::Scenario;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Unified,
    #[value(name = "joint_no_prefix")]
    JointNoPrefix,
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_dim: usize,
    pub prefix_len: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub init_seed: u64,
    pub sr_prefix_order: SrPrefixOrder,

    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: ModeName,
    /// Required when `mode` is `single`.
    pub scenario: Option<Scenario>,
    pub mixing: Mixing,
    /// `null` disables clipping.
    pub clip_norm: Option<f64>,
    pub target_accuracy: Option<f64>,
    /// Wall-clock seconds after which no new epoch starts.
    pub time_budget_seconds: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub heldout_fraction: f64,

    pub n_pairs: usize,
    pub min_frequency: u32,
    pub synth_docs: usize,
    pub synth_topics: usize,
    pub fusion: Option<FusionMethod>,

    pub corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub summary_matching: Option<PathBuf>,
    pub document_matching: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::desk(0);
        let t = TrainConfig::default();
        RunConfig {
            hidden_dim: m.hidden_dim,
            n_layers: m.n_layers,
            n_heads: m.n_heads,
            ffn_dim: m.ffn_dim,
            prefix_len: m.prefix_len,
            max_len: m.max_len,
            dropout: m.dropout,
            init_seed: m.init_seed,
            sr_prefix_order: m.sr_prefix_order,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            mode: ModeName::Unified,
            scenario: None,
            mixing: t.mixing,
            clip_norm: t.clip_norm,
            target_accuracy: t.target_accuracy,
            time_budget_seconds: None,
            beta1: t.optimizer.beta1,
            beta2: t.optimizer.beta2,
            adam_eps: t.optimizer.eps,
            weight_decay: t.optimizer.weight_decay,
            heldout_fraction: 0.1,
            n_pairs: 15_000,
            min_frequency: 1,
            synth_docs: 2000,
            synth_topics: 50,
            fusion: None,
            corpus: None,
            vocab: None,
            index: None,
            summary_matching: None,
            document_matching: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::from_file)
    }

    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig> {
        let c = ModelConfig {
            max_len: self.max_len,
            dropout: self.dropout,
            init_seed: self.init_seed,
            sr_prefix_order: self.sr_prefix_order,
            ..ModelConfig::scaled(
                vocab_size,
                self.hidden_dim,
                self.n_layers,
                self.n_heads,
                self.ffn_dim,
                self.prefix_len,
            )
        };
        c.validate()?;
        Ok(c)
    }

    pub fn train_mode(&self) -> Result<TrainMode> {
        match (self.mode, self.scenario) {
            (ModeName::Unified, _) => Ok(TrainMode::Unified),
            (ModeName::JointNoPrefix, _) => Ok(TrainMode::JointNoPrefix),
            (ModeName::Single, Some(s)) => Ok(TrainMode::SingleScenario(s)),
            (ModeName::Single, None) => Err(Error::Config("mode single needs a scenario".into())),
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let c = TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            optimizer: AdamWConfig {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
                weight_decay: self.weight_decay,
            },
            mode: self.train_mode()?,
            mixing: self.mixing,
            clip_norm: self.clip_norm,
            target_accuracy: self.target_accuracy,
        };
        c.validate()?;
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return Err(Error::Config(format!(
                "heldout_fraction {} outside [0, 1)",
                self.heldout_fraction
            )));
        }
        if let Some(t) = self.time_budget_seconds {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::Config(format!("time_budget_seconds {t} must be positive")));
            }
        }
        Ok(c)
    }

    /// The required path `name`, or a config error naming it.
    pub fn require<'a>(&'a self, value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing required path {name} (flag --{})", name.replace('_', "-"))))
    }
}
