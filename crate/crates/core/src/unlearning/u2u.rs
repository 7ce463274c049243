use ndarray::Array2;
use rand::seq::SliceRandom;

use super::{Result, UnlearnError};
use crate::dataio::AttributeLabels;
use crate::linalg::{row, sq_dist};
use crate::rng::{self, stream};

/// Cross-class user pairs, drawn once and reused at every step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossClassMatching {
    /// One list of `(a, b)` user pairs per unordered class pair.
    pub groups: Vec<Vec<(usize, usize)>>,
}

impl CrossClassMatching {
    /// For each class pair, shuffles both member lists and zips them, so
    /// the larger class is subsampled to the size of the smaller.
    pub fn new(labels: &AttributeLabels, seed: u64) -> Result<Self> {
        let mut members = labels.members();
        if let Some(c) = members.iter().position(Vec::is_empty) {
            return Err(UnlearnError::EmptyClass(c));
        }
        let mut rng = rng::stream_rng(seed, stream::PAIRING);
        for m in &mut members {
            m.shuffle(&mut rng);
        }
        let mut groups = Vec::new();
        for p in 0..members.len() {
            for q in p + 1..members.len() {
                groups.push(
                    members[p]
                        .iter()
                        .copied()
                        .zip(members[q].iter().copied())
                        .collect(),
                );
            }
        }
        Ok(Self { groups })
    }

    pub fn n_pairs(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// Sum over class pairs of the mean squared distance between matched users.
pub fn u2u_distinguishability(emb: &Array2<f64>, matching: &CrossClassMatching) -> f64 {
    matching
        .groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|&(a, b)| sq_dist(row(emb, a), row(emb, b)))
                .sum::<f64>()
                / g.len() as f64
        })
        .sum()
}

pub fn u2u_grad(emb: &Array2<f64>, matching: &CrossClassMatching) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(emb.raw_dim());
    let mut value = 0.0;
    for g in &matching.groups {
        let inv = 1.0 / g.len() as f64;
        let mut sum = 0.0;
        for &(a, b) in g {
            let (ea, eb) = (row(emb, a), row(emb, b));
            sum += sq_dist(ea, eb);
            for d in 0..emb.ncols() {
                let diff = 2.0 * inv * (ea[d] - eb[d]);
                grad[[a, d]] += diff;
                grad[[b, d]] -= diff;
            }
        }
        value += sum * inv;
    }
    (value, grad)
}

/// Squared Frobenius distance to the pre-unlearning table.
pub fn regularization_loss(emb: &Array2<f64>, original: &Array2<f64>) -> Result<f64> {
    if emb.dim() != original.dim() {
        return Err(UnlearnError::Shape(format!(
            "{:?} vs {:?}",
            emb.dim(),
            original.dim()
        )));
    }
    Ok(emb
        .iter()
        .zip(original)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

pub fn regularization_grad(
    emb: &Array2<f64>,
    original: &Array2<f64>,
) -> Result<(f64, Array2<f64>)> {
    let v = regularization_loss(emb, original)?;
    Ok((v, (emb - original) * 2.0))
}
