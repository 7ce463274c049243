//! Leave-one-out ranking metrics over sampled candidate lists.
//!
//! A user's rank is the 1-based position of the held-out positive when its
//! candidates are sorted by descending score. Negatives scoring equal to the
//! positive are placed ahead of it, so a constant scorer ranks every
//! positive last.

use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;
use thiserror::Error;

use crate::dataio::EvalSplit;
use crate::linalg::{dot, row};
use crate::recmodels::{EmbeddingModel, ModelError, NormAdjacency};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("no ranks to average")]
    Empty,
    #[error("cutoff K must be at least 1")]
    InvalidCutoff,
    #[error("rank {0} is not a valid 1-based rank")]
    InvalidRank(usize),
    #[error("user {user}: candidate {item} appears more than once")]
    DuplicateCandidate { user: usize, item: usize },
    #[error("user {user}: non-finite score")]
    NonFiniteScore { user: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Ranking quality of one model on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct RecReport {
    pub ndcg: BTreeMap<usize, f64>,
    pub hr: BTreeMap<usize, f64>,
    /// Indexed by user.
    pub per_user_ranks: Vec<usize>,
}

/// `1 + #{negatives scoring at least as high as the positive}`.
pub fn rank_of_positive(positive: f64, negatives: &[f64]) -> usize {
    1 + negatives.iter().filter(|&&s| s >= positive).count()
}

/// Rank of `candidates[0]` among `candidates` for `user`, scored by dot
/// product of the given scoring tables.
pub fn rank_candidates(
    users: &Array2<f64>,
    items: &Array2<f64>,
    user: usize,
    candidates: &[usize],
) -> Result<usize> {
    let mut seen = HashSet::with_capacity(candidates.len());
    for &c in candidates {
        if !seen.insert(c) {
            return Err(MetricError::DuplicateCandidate { user, item: c });
        }
    }
    let eu = row(users, user);
    let scores: Vec<f64> = candidates.iter().map(|&i| dot(eu, row(items, i))).collect();
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore { user });
    }
    Ok(rank_of_positive(scores[0], &scores[1..]))
}

/// Mean NDCG@K and HR@K with one relevant item per user (ideal DCG = 1).
pub fn ndcg_hr_at_k(ranks: &[usize], k: usize) -> Result<(f64, f64)> {
    if ranks.is_empty() {
        return Err(MetricError::Empty);
    }
    if k == 0 {
        return Err(MetricError::InvalidCutoff);
    }
    let (mut ndcg, mut hr) = (0.0, 0.0);
    for &r in ranks {
        if r == 0 {
            return Err(MetricError::InvalidRank(r));
        }
        if r <= k {
            hr += 1.0;
            ndcg += 1.0 / ((r + 1) as f64).log2();
        }
    }
    let n = ranks.len() as f64;
    Ok((ndcg / n, hr / n))
}

/// Ranks every user's test candidates and reports NDCG/HR at each cutoff.
pub fn evaluate(
    model: &EmbeddingModel,
    adj: Option<&NormAdjacency>,
    split: &EvalSplit,
    cutoffs: &[usize],
) -> Result<RecReport> {
    let (users, items) = model.final_embeddings(adj)?;
    evaluate_embeddings(&users, &items, split, cutoffs)
}

pub fn evaluate_embeddings(
    users: &Array2<f64>,
    items: &Array2<f64>,
    split: &EvalSplit,
    cutoffs: &[usize],
) -> Result<RecReport> {
    let per_user_ranks = split
        .test
        .iter()
        .enumerate()
        .map(|(u, case)| rank_candidates(users, items, u, &case.candidates()))
        .collect::<Result<Vec<_>>>()?;
    let mut ndcg = BTreeMap::new();
    let mut hr = BTreeMap::new();
    for &k in cutoffs {
        let (n, h) = ndcg_hr_at_k(&per_user_ranks, k)?;
        ndcg.insert(k, n);
        hr.insert(k, h);
    }
    Ok(RecReport {
        ndcg,
        hr,
        per_user_ranks,
    })
}
