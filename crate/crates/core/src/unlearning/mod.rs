//! Attribute unlearning on trained embedding models.
//!
//! `u2u` and `d2d` edit a trained model's user table after the fact by
//! minimizing a distinguishability term between attribute classes plus an
//! anchor to the original table. `retrain` and `adv` are in-training
//! baselines that fit a fresh model with an extra term attached.

mod inprocess;
mod mmd;
mod u2u;

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{AttributeLabels, EvalSplit};
use crate::optim::Adam;
use crate::recmodels::{
    build_norm_adjacency, EmbeddingModel, ModelError, ModelKind, NormAdjacency, TrainHyperparams,
};

pub use inprocess::{adv_in_training, retrain_with_penalty};
pub use mmd::{median_pairwise_distance, mmd_by_class, mmd_by_class_grad, mmd_rbf_sq};
pub use u2u::{
    regularization_grad, regularization_loss, u2u_distinguishability, u2u_grad, CrossClassMatching,
};

#[derive(Debug, Error)]
pub enum UnlearnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("attribute class {0} has no users")]
    EmptyClass(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, UnlearnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnlearnMethod {
    Original,
    U2u,
    D2d,
    Retrain,
    Adv,
}

impl UnlearnMethod {
    pub const ALL: [UnlearnMethod; 5] = [
        UnlearnMethod::Original,
        UnlearnMethod::U2u,
        UnlearnMethod::D2d,
        UnlearnMethod::Retrain,
        UnlearnMethod::Adv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UnlearnMethod::Original => "original",
            UnlearnMethod::U2u => "u2u",
            UnlearnMethod::D2d => "d2d",
            UnlearnMethod::Retrain => "retrain",
            UnlearnMethod::Adv => "adv",
        }
    }

    /// Whether the method fits a new model instead of editing a trained one.
    pub fn trains_from_scratch(self) -> bool {
        matches!(self, UnlearnMethod::Retrain | UnlearnMethod::Adv)
    }
}

impl std::fmt::Display for UnlearnMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for UnlearnMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// Kernel bandwidth for the MMD term: a fixed value, or the median pairwise
/// distance of the user embeddings before the first step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub enum Bandwidth {
    Median,
    Fixed(f64),
}

impl TryFrom<serde_json::Value> for Bandwidth {
    type Error = String;

    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        match v {
            serde_json::Value::String(s) if s == "median" => Ok(Bandwidth::Median),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(Bandwidth::Fixed)
                .ok_or_else(|| "bandwidth must be a number".to_string()),
            other => Err(format!(
                "bandwidth must be \"median\" or a number, got {other}"
            )),
        }
    }
}

impl From<Bandwidth> for serde_json::Value {
    fn from(b: Bandwidth) -> Self {
        match b {
            Bandwidth::Median => serde_json::Value::String("median".into()),
            Bandwidth::Fixed(v) => serde_json::json!(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    /// Plain gradient descent.
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnlearnHyperparams {
    /// Weight on the anchor-to-original term for u2u/d2d.
    pub au_trade_off: f64,
    /// Weight on the distinguishability term for retrain, and the gradient
    /// reversal scale for adv.
    pub retrain_trade_off: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub bandwidth: Bandwidth,
    /// Seeds the u2u matching and the adversary.
    pub seed: u64,
    pub adv_hidden: usize,
    pub adv_learning_rate: f64,
}

impl Default for UnlearnHyperparams {
    fn default() -> Self {
        Self {
            au_trade_off: 1e-6,
            retrain_trade_off: 1.0,
            steps: 500,
            learning_rate: 1e-2,
            optimizer: Optimizer::Adam,
            bandwidth: Bandwidth::Median,
            seed: 0,
            adv_hidden: 64,
            adv_learning_rate: 1e-3,
        }
    }
}

impl UnlearnHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(UnlearnError::Config(m));
        for (name, v) in [
            ("au_trade_off", self.au_trade_off),
            ("retrain_trade_off", self.retrain_trade_off),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("adv_learning_rate", self.adv_learning_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if let Bandwidth::Fixed(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("bandwidth must be positive, got {b}"));
            }
        }
        if self.adv_hidden == 0 {
            return bad("adv_hidden must be at least 1".into());
        }
        Ok(())
    }
}

/// One row of a loss trace.
///
/// For u2u/d2d a row is one optimizer step and
/// `total = dist + au_trade_off * reg`. For retrain/adv a row is one epoch,
/// `reg` holds the mean recommendation loss and `total` the mean combined
/// objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub dist: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct UnlearnResult {
    pub model: EmbeddingModel,
    pub wall_time_seconds: f64,
    pub trace: Vec<TraceRow>,
    /// Per-epoch training accuracy of the adversary (adv only).
    pub adversary_accuracy: Vec<f64>,
}

/// The distinguishability term minimized by a post-training method.
#[derive(Debug, Clone)]
pub enum Distinguishability {
    Mmd { bandwidth: f64 },
    U2u(CrossClassMatching),
}

impl Distinguishability {
    pub fn value_and_grad(
        &self,
        emb: &Array2<f64>,
        labels: &AttributeLabels,
    ) -> Result<(f64, Array2<f64>)> {
        match self {
            Distinguishability::Mmd { bandwidth } => {
                mmd_by_class_grad(emb, labels.labels(), labels.n_classes(), *bandwidth)
            }
            Distinguishability::U2u(m) => Ok(u2u_grad(emb, m)),
        }
    }
}

/// Scoring user embeddings of `model` as a function of its user table.
fn user_finals(model: &EmbeddingModel, adj: Option<&NormAdjacency>) -> Result<Array2<f64>> {
    Ok(model.final_embeddings(adj)?.0)
}

/// Pulls a gradient on the scoring user embeddings back to the user table.
fn user_table_grad(
    model: &EmbeddingModel,
    adj: Option<&NormAdjacency>,
    g: Array2<f64>,
) -> Array2<f64> {
    match (model.kind, adj) {
        (ModelKind::LightGcn, Some(a)) => {
            let mut stacked = Array2::zeros((model.n_users() + model.n_items(), model.dim()));
            stacked
                .slice_mut(ndarray::s![..model.n_users(), ..])
                .assign(&g);
            a.propagate_mean(&stacked, model.layers)
                .slice(ndarray::s![..model.n_users(), ..])
                .to_owned()
        }
        _ => g,
    }
}

/// Minimizes `term + au_trade_off · |E - E0|²` over the user table `E`,
/// leaving the item table untouched. For LightGCN the term is measured on
/// the propagated user embeddings.
pub fn unlearn_post_training(
    model: &EmbeddingModel,
    adj: Option<&NormAdjacency>,
    labels: &AttributeLabels,
    term: &Distinguishability,
    hp: &UnlearnHyperparams,
) -> Result<(EmbeddingModel, Vec<TraceRow>)> {
    hp.validate()?;
    if labels.n_users() != model.n_users() {
        return Err(UnlearnError::Shape(format!(
            "{} labels for {} users",
            labels.n_users(),
            model.n_users()
        )));
    }
    let original = model.user_emb.clone();
    let mut model = model.clone();
    let mut adam = Adam::new(model.user_emb.len(), hp.learning_rate);
    let mut trace = Vec::with_capacity(hp.steps + 1);
    let mut record = |step: usize, dist: f64, reg: f64| -> Result<()> {
        let total = dist + hp.au_trade_off * reg;
        if !total.is_finite() {
            return Err(UnlearnError::NonFinite { step });
        }
        trace.push(TraceRow {
            step,
            dist,
            reg,
            total,
        });
        Ok(())
    };
    for step in 0..hp.steps {
        let finals = user_finals(&model, adj)?;
        let (dist, g_dist) = term.value_and_grad(&finals, labels)?;
        let (reg, g_reg) = regularization_grad(&model.user_emb, &original)?;
        record(step, dist, reg)?;
        let mut grad = user_table_grad(&model, adj, g_dist);
        grad.scaled_add(hp.au_trade_off, &g_reg);
        let params = model.user_emb.as_slice_mut().expect("standard layout");
        match hp.optimizer {
            Optimizer::Adam => adam.step(params, grad.as_slice().expect("standard layout")),
            Optimizer::Gd => {
                for (p, g) in params.iter_mut().zip(grad.iter()) {
                    *p -= hp.learning_rate * g;
                }
            }
        }
    }
    if hp.steps > 0 {
        let finals = user_finals(&model, adj)?;
        let (dist, _) = term.value_and_grad(&finals, labels)?;
        let reg = regularization_loss(&model.user_emb, &original)?;
        record(hp.steps, dist, reg)?;
    }
    Ok((model, trace))
}

/// Bandwidth to use for the MMD term on `emb`.
pub fn resolve_bandwidth(b: Bandwidth, emb: &Array2<f64>) -> f64 {
    match b {
        Bandwidth::Median => median_pairwise_distance(emb),
        Bandwidth::Fixed(v) => v,
    }
}

/// Applies `method`. `model` is the trained model for the post-training
/// methods and supplies only the model kind for `retrain`/`adv`, which fit
/// from scratch on `split` with `train_hp`.
pub fn run_unlearn(
    model: &EmbeddingModel,
    split: &EvalSplit,
    labels: &AttributeLabels,
    method: UnlearnMethod,
    train_hp: &TrainHyperparams,
    hp: &UnlearnHyperparams,
) -> Result<UnlearnResult> {
    hp.validate()?;
    match method {
        UnlearnMethod::Original => Ok(UnlearnResult {
            model: model.clone(),
            wall_time_seconds: 0.0,
            trace: Vec::new(),
            adversary_accuracy: Vec::new(),
        }),
        UnlearnMethod::U2u | UnlearnMethod::D2d => {
            let adj = match model.kind {
                ModelKind::LightGcn => Some(build_norm_adjacency(&split.train)?),
                ModelKind::Mf => None,
            };
            let start = Instant::now();
            let term = if method == UnlearnMethod::D2d {
                let finals = user_finals(model, adj.as_ref())?;
                Distinguishability::Mmd {
                    bandwidth: resolve_bandwidth(hp.bandwidth, &finals),
                }
            } else {
                Distinguishability::U2u(CrossClassMatching::new(labels, hp.seed)?)
            };
            let (model, trace) = unlearn_post_training(model, adj.as_ref(), labels, &term, hp)?;
            Ok(UnlearnResult {
                model,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                trace,
                adversary_accuracy: Vec::new(),
            })
        }
        UnlearnMethod::Retrain => retrain_with_penalty(model.kind, split, labels, train_hp, hp),
        UnlearnMethod::Adv => adv_in_training(model.kind, split, labels, train_hp, hp),
    }
}
