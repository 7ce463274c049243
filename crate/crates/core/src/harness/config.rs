use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::attack::{AttackParams, AttackerKind, GbtParams, MlpParams};
use crate::recmodels::{ModelKind, TrainHyperparams};
use crate::unlearning::{Bandwidth, Optimizer, UnlearnHyperparams, UnlearnMethod};

fn default_au() -> f64 {
    1e-6
}

fn default_one() -> f64 {
    1.0
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

fn default_n_neg() -> usize {
    crate::dataio::DEFAULT_TEST_NEGATIVES
}

/// Optional replacements for the model's training defaults. The seed is
/// always the experiment seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_per_pos: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
}

impl TrainOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// Optional replacements for the unlearning defaults other than the two
/// trade-offs, which sit at the top level of the config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnlearnOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<Bandwidth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adv_hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adv_learning_rate: Option<f64>,
}

impl UnlearnOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// A training + unlearning experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnlearnConfig {
    pub method: UnlearnMethod,
    pub model: ModelKind,
    /// `ml-100k`, `ml-1m`, `lfm-2b`, or any name with a generic raw layout
    /// under `<data_dir>/raw/<dataset>/`.
    pub dataset: String,
    /// Accepted for compatibility; everything runs on the CPU.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default = "default_au")]
    pub au_trade_off: f64,
    #[serde(default = "default_one")]
    pub retrain_trade_off: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// A prepared split (from `preprocess`); bypasses the raw files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_interactions: Option<usize>,
    #[serde(default = "default_n_neg")]
    pub n_neg: usize,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default, skip_serializing_if = "TrainOverrides::is_empty")]
    pub train: TrainOverrides,
    #[serde(default, skip_serializing_if = "UnlearnOverrides::is_empty")]
    pub unlearn: UnlearnOverrides,
}

impl UnlearnConfig {
    pub fn new(method: UnlearnMethod, model: ModelKind, dataset: &str) -> Self {
        Self {
            method,
            model,
            dataset: dataset.to_string(),
            device: None,
            au_trade_off: default_au(),
            retrain_trade_off: 1.0,
            seed: 0,
            data_dir: default_data_dir(),
            split_dir: None,
            min_interactions: None,
            n_neg: default_n_neg(),
            split_seed: 0,
            train: TrainOverrides::default(),
            unlearn: UnlearnOverrides::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Returns the config and the exact bytes it was read from.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = read_config(path)?;
        Ok((Self::from_json(&text)?, text))
    }

    pub fn train_hyperparams(&self) -> Result<TrainHyperparams> {
        let o = &self.train;
        let d = TrainHyperparams::defaults_for(self.model);
        let hp = TrainHyperparams {
            dim: o.dim.unwrap_or(d.dim),
            learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
            l2_weight: o.l2_weight.unwrap_or(d.l2_weight),
            epochs: o.epochs.unwrap_or(d.epochs),
            batch_size: o.batch_size.unwrap_or(d.batch_size),
            neg_per_pos: o.neg_per_pos.unwrap_or(d.neg_per_pos),
            layers: o.layers.unwrap_or(d.layers),
            seed: self.seed,
        };
        hp.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(hp)
    }

    pub fn unlearn_hyperparams(&self) -> Result<UnlearnHyperparams> {
        let o = &self.unlearn;
        let d = UnlearnHyperparams::default();
        let hp = UnlearnHyperparams {
            au_trade_off: self.au_trade_off,
            retrain_trade_off: self.retrain_trade_off,
            steps: o.steps.unwrap_or(d.steps),
            learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
            optimizer: o.optimizer.unwrap_or(d.optimizer),
            bandwidth: o.bandwidth.unwrap_or(d.bandwidth),
            seed: self.seed,
            adv_hidden: o.adv_hidden.unwrap_or(d.adv_hidden),
            adv_learning_rate: o.adv_learning_rate.unwrap_or(d.adv_learning_rate),
        };
        hp.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(hp)
    }
}

fn default_attackers() -> Vec<AttackerKind> {
    vec![AttackerKind::Mlp, AttackerKind::Gbt]
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_frac() -> f64 {
    0.8
}

/// Attacks against a finished experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// Experiment directory, absolute or relative to the results root.
    pub experiment: PathBuf,
    #[serde(default = "default_attackers")]
    pub attackers: Vec<AttackerKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_frac")]
    pub train_frac: f64,
    #[serde(default)]
    pub mlp: MlpParams,
    #[serde(default)]
    pub gbt: GbtParams,
}

impl AttackConfig {
    pub fn new(experiment: impl Into<PathBuf>) -> Self {
        Self {
            experiment: experiment.into(),
            attackers: default_attackers(),
            seeds: default_seeds(),
            train_frac: default_frac(),
            mlp: MlpParams::default(),
            gbt: GbtParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_config(path)?)
    }

    pub fn params(&self) -> AttackParams {
        AttackParams {
            train_frac: self.train_frac,
            seeds: self.seeds.clone(),
            mlp: self.mlp.clone(),
            gbt: self.gbt.clone(),
        }
    }
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))
}
