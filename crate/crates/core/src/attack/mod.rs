//! Attribute-inference attacks on user embeddings.
//!
//! Protocol: for each seed, a stratified 80/20 split of the users; an
//! attacker is fit on the training users' embeddings and scored on the rest.
//! Reports average the per-seed metrics.

mod gbt;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::AttributeLabels;
use crate::linalg::gather_rows;
use crate::nn::{argmax, Mlp, MlpAdam};
use crate::rng::{self, stream};

pub use gbt::{train_gbt_attacker, GbtAttacker, GbtParams};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("class {class} has {count} member(s); at least 2 are needed to split")]
    ClassTooSmall { class: usize, count: usize },
    #[error("training rows contain a single class")]
    SingleClass,
    #[error("AUC is undefined: the test rows contain a single class")]
    AucUndefined,
    #[error("non-finite attacker loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, AttackError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackerKind {
    Mlp,
    /// Gradient-boosted trees; `xgb` is accepted as an alias.
    #[serde(alias = "xgb")]
    Gbt,
}

impl AttackerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackerKind::Mlp => "mlp",
            AttackerKind::Gbt => "gbt",
        }
    }
}

impl std::fmt::Display for AttackerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AttackerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(AttackerKind::Mlp),
            "gbt" | "xgb" => Ok(AttackerKind::Gbt),
            other => Err(format!("unknown attacker {other:?}")),
        }
    }
}

pub trait Classifier {
    /// One row of class probabilities per input row.
    fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            epochs: 200,
            batch_size: 200,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpAttacker {
    pub net: Mlp,
}

impl Classifier for MlpAttacker {
    fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        self.net.predict_proba(x)
    }
}

pub(crate) fn check_training_set(x: &Array2<f64>, y: &[usize], n_classes: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(AttackError::Shape(format!(
            "{} rows, {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if n_classes < 2 || y.iter().any(|&c| c >= n_classes) {
        return Err(AttackError::Config(format!(
            "labels must lie in 0..{n_classes}"
        )));
    }
    if y.iter().all(|&c| Some(&c) == y.first()) {
        return Err(AttackError::SingleClass);
    }
    Ok(())
}

/// Mini-batch Adam on cross-entropy with ReLU hidden layers.
pub fn train_mlp_attacker(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    p: &MlpParams,
    seed: u64,
) -> Result<MlpAttacker> {
    check_training_set(x, y, n_classes)?;
    if p.batch_size == 0 || !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) || p.hidden.contains(&0) {
        return Err(AttackError::Config("invalid MLP parameters".into()));
    }
    let mut rng = rng::stream_rng(seed, stream::ATTACKER);
    let sizes: Vec<usize> = std::iter::once(x.ncols())
        .chain(p.hidden.iter().copied())
        .chain(std::iter::once(n_classes))
        .collect();
    let mut net = Mlp::new(&sizes, &mut rng);
    let mut opt = MlpAdam::new(&net, p.learning_rate);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    for epoch in 0..p.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(p.batch_size) {
            let xb = gather_rows(x, chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, grads, _, _) = net.loss_and_grads(&xb, &yb, p.weight_decay);
            if !loss.is_finite() {
                return Err(AttackError::NonFinite { epoch });
            }
            opt.step(&mut net, &grads);
        }
    }
    Ok(MlpAttacker { net })
}

/// Mann–Whitney AUC of `scores` for `positive` rows against the rest;
/// tied pairs count one half.
pub fn auc_rank(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(AttackError::Shape(format!(
            "{} scores, {} flags",
            scores.len(),
            positive.len()
        )));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(AttackError::AucUndefined);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks over tie groups.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Metrics of one attacker on one held-out set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub seed: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// `None` when the test rows hold a single class.
    pub auc: Option<f64>,
}

impl FoldMetrics {
    pub fn auc(&self) -> Result<f64> {
        self.auc.ok_or(AttackError::AucUndefined)
    }
}

/// Accuracy at argmax, macro precision/recall (a class never predicted, or
/// absent from the truth, contributes 0), and AUC: for two classes on the
/// class-1 probability, otherwise the mean one-vs-rest AUC.
pub fn evaluate_attack(probs: &Array2<f64>, truth: &[usize]) -> Result<FoldMetrics> {
    let n = truth.len();
    if n == 0 || probs.nrows() != n {
        return Err(AttackError::Shape(format!(
            "{} rows, {} labels",
            probs.nrows(),
            n
        )));
    }
    let c = probs.ncols();
    let preds: Vec<usize> = probs
        .rows()
        .into_iter()
        .map(|r| argmax(&r.to_vec()))
        .collect();
    let correct = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    let (mut precision, mut recall) = (0.0, 0.0);
    for k in 0..c {
        let tp = preds
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == k && t == k)
            .count() as f64;
        let predicted = preds.iter().filter(|&&p| p == k).count() as f64;
        let actual = truth.iter().filter(|&&t| t == k).count() as f64;
        if predicted > 0.0 {
            precision += tp / predicted;
        }
        if actual > 0.0 {
            recall += tp / actual;
        }
    }
    let auc = if c == 2 {
        let scores: Vec<f64> = probs.column(1).to_vec();
        let pos: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
        auc_rank(&scores, &pos).ok()
    } else {
        (0..c)
            .map(|k| {
                let scores: Vec<f64> = probs.column(k).to_vec();
                let pos: Vec<bool> = truth.iter().map(|&t| t == k).collect();
                auc_rank(&scores, &pos)
            })
            .collect::<Result<Vec<f64>>>()
            .ok()
            .map(|v| v.iter().sum::<f64>() / c as f64)
    };
    Ok(FoldMetrics {
        seed: 0,
        accuracy: correct as f64 / n as f64,
        precision: precision / c as f64,
        recall: recall / c as f64,
        auc,
    })
}

/// Stratified shuffle split; every class keeps at least one user on each
/// side.
pub fn split_users(
    labels: &AttributeLabels,
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(AttackError::Config(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut rng = rng::stream_rng(seed, stream::ATTACK_SPLIT);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in labels.members().into_iter().enumerate() {
        if members.len() < 2 {
            return Err(AttackError::ClassTooSmall {
                class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n_test = (((1.0 - train_frac) * members.len() as f64).round() as usize)
            .clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackParams {
    pub train_frac: f64,
    pub seeds: Vec<u64>,
    pub mlp: MlpParams,
    pub gbt: GbtParams,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            seeds: (0..5).collect(),
            mlp: MlpParams::default(),
            gbt: GbtParams::default(),
        }
    }
}

/// Seed-averaged attack results for one attacker kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub kind: AttackerKind,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Mean over folds where AUC is defined.
    pub auc: f64,
    pub folds: Vec<FoldMetrics>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Fits and scores `kind` on `emb` for every seed in `p.seeds`.
pub fn attack(
    emb: &Array2<f64>,
    labels: &AttributeLabels,
    kind: AttackerKind,
    p: &AttackParams,
) -> Result<AttackReport> {
    if emb.nrows() != labels.n_users() {
        return Err(AttackError::Shape(format!(
            "{} rows, {} labels",
            emb.nrows(),
            labels.n_users()
        )));
    }
    if p.seeds.is_empty() {
        return Err(AttackError::Config("at least one seed is required".into()));
    }
    let y = labels.labels();
    let c = labels.n_classes();
    let mut folds = Vec::with_capacity(p.seeds.len());
    let (mut n_train, mut n_test) = (0, 0);
    for &seed in &p.seeds {
        let (tr, te) = split_users(labels, p.train_frac, seed)?;
        let (xtr, xte) = (gather_rows(emb, &tr), gather_rows(emb, &te));
        let ytr: Vec<usize> = tr.iter().map(|&u| y[u]).collect();
        let yte: Vec<usize> = te.iter().map(|&u| y[u]).collect();
        let probs = match kind {
            AttackerKind::Mlp => {
                train_mlp_attacker(&xtr, &ytr, c, &p.mlp, seed)?.predict_proba(&xte)
            }
            AttackerKind::Gbt => train_gbt_attacker(&xtr, &ytr, c, &p.gbt)?.predict_proba(&xte),
        };
        let mut m = evaluate_attack(&probs, &yte)?;
        m.seed = seed;
        folds.push(m);
        (n_train, n_test) = (tr.len(), te.len());
    }
    let mean =
        |f: &dyn Fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / folds.len() as f64;
    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
    if aucs.is_empty() {
        return Err(AttackError::AucUndefined);
    }
    Ok(AttackReport {
        kind,
        accuracy: mean(&|f| f.accuracy),
        precision: mean(&|f| f.precision),
        recall: mean(&|f| f.recall),
        auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        folds,
        n_train,
        n_test,
    })
}

/// Shuffles labels in place with the given seed; a sanity baseline for
/// attack numbers.
pub fn shuffled_labels(labels: &AttributeLabels, seed: u64) -> AttributeLabels {
    let mut rng = rng::stream_rng(seed, stream::ATTACK_SPLIT ^ 0xff);
    let mut l = labels.labels().to_vec();
    for i in (1..l.len()).rev() {
        let j = rng.random_range(0..=i);
        l.swap(i, j);
    }
    AttributeLabels::new(l, labels.class_names().to_vec()).expect("same classes")
}
