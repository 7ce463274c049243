//! Embedding recommenders: dot-product matrix factorization and LightGCN,
//! both trained with BPR.

mod adjacency;
mod bpr;
mod checkpoint;
mod train;

use std::path::PathBuf;

use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::rng::{self, stream};

pub use adjacency::{build_norm_adjacency, lightgcn_propagate, NormAdjacency};
pub use bpr::{bpr_loss, bpr_loss_and_grad, log_sigmoid, Triple};
pub use checkpoint::{
    decode_f32, encode_f32, load_checkpoint, read_checkpoint_header, save_checkpoint,
    CheckpointHeader,
};
pub use train::{train, train_with_hook, NoHook, TrainHook, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("node {node} has no interactions")]
    ZeroDegree { node: String },
    #[error("non-finite value in {context} at epoch {epoch}")]
    NonFinite { context: String, epoch: usize },
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Dot-product matrix factorization (the GMF core of NCF).
    #[serde(alias = "ncf", alias = "nmf")]
    Mf,
    #[serde(alias = "lgcn")]
    LightGcn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mf => "mf",
            ModelKind::LightGcn => "lightgcn",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mf" | "ncf" | "nmf" => Ok(ModelKind::Mf),
            "lightgcn" | "lgcn" => Ok(ModelKind::LightGcn),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

/// BPR training knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainHyperparams {
    pub dim: usize,
    pub learning_rate: f64,
    /// Weight on the per-triple squared norms of the (ego) embeddings.
    pub l2_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub neg_per_pos: usize,
    /// LightGCN propagation depth; ignored for MF.
    pub layers: usize,
    pub seed: u64,
}

impl TrainHyperparams {
    pub fn defaults_for(kind: ModelKind) -> Self {
        Self {
            dim: 64,
            learning_rate: 1e-3,
            l2_weight: 3e-3,
            epochs: match kind {
                ModelKind::Mf => 200,
                ModelKind::LightGcn => 400,
            },
            batch_size: 2048,
            neg_per_pos: 1,
            layers: 3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.dim == 0 {
            return bad("embedding dimension must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2 weight must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.neg_per_pos == 0 {
            return bad("negatives per positive must be at least 1");
        }
        Ok(())
    }
}

/// User and item embedding tables plus the scoring structure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub kind: ModelKind,
    /// `n_users × d`; for LightGCN these are the layer-0 (ego) embeddings.
    pub user_emb: Array2<f64>,
    /// `n_items × d`.
    pub item_emb: Array2<f64>,
    /// Propagation depth for LightGCN, 0 for MF.
    pub layers: usize,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.user_emb.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.user_emb.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.item_emb.nrows()
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(self.user_emb.iter()) && linalg::all_finite(self.item_emb.iter())
    }

    /// The tables used for scoring: the raw tables for MF, the propagated
    /// finals for LightGCN.
    pub fn final_embeddings(
        &self,
        adj: Option<&NormAdjacency>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        match self.kind {
            ModelKind::Mf => Ok((self.user_emb.clone(), self.item_emb.clone())),
            ModelKind::LightGcn => {
                let adj = adj.ok_or_else(|| {
                    ModelError::Config("LightGCN scoring needs the normalized adjacency".into())
                })?;
                lightgcn_propagate(self, adj)
            }
        }
    }
}

/// Fresh model with entries drawn i.i.d. from N(0, 0.1²), users first.
pub fn init_model(
    kind: ModelKind,
    n_users: usize,
    n_items: usize,
    hp: &TrainHyperparams,
) -> Result<EmbeddingModel> {
    hp.validate()?;
    if n_users == 0 || n_items == 0 {
        return Err(ModelError::Config(
            "model needs at least one user and one item".into(),
        ));
    }
    let mut rng = rng::stream_rng(hp.seed, stream::INIT);
    let normal = Normal::new(0.0, 0.1).expect("valid normal");
    let user_emb = Array2::from_shape_simple_fn((n_users, hp.dim), || normal.sample(&mut rng));
    let item_emb = Array2::from_shape_simple_fn((n_items, hp.dim), || normal.sample(&mut rng));
    Ok(EmbeddingModel {
        kind,
        user_emb,
        item_emb,
        layers: match kind {
            ModelKind::Mf => 0,
            ModelKind::LightGcn => hp.layers,
        },
    })
}

/// Dot product of the user's and item's scoring embeddings. For LightGCN
/// this propagates the whole graph; use [`EmbeddingModel::final_embeddings`]
/// once when scoring many pairs.
pub fn score(
    model: &EmbeddingModel,
    adj: Option<&NormAdjacency>,
    user: usize,
    item: usize,
) -> Result<f64> {
    if user >= model.n_users() || item >= model.n_items() {
        return Err(ModelError::OutOfRange(format!(
            "({user}, {item}) outside {}x{}",
            model.n_users(),
            model.n_items()
        )));
    }
    let (users, items) = model.final_embeddings(adj)?;
    Ok(linalg::dot(
        linalg::row(&users, user),
        linalg::row(&items, item),
    ))
}
