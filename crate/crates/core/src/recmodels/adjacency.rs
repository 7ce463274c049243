use ndarray::{s, Array2};

use super::{EmbeddingModel, ModelError, ModelKind, Result};
use crate::dataio::InteractionDataset;
use crate::linalg;

/// Symmetrically normalized bipartite adjacency `D^-1/2 A D^-1/2` over the
/// stacked node space `[users; items]`, stored as CSR.
///
/// Repeated (user, item) rows collapse into one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdjacency {
    n_users: usize,
    n_items: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl NormAdjacency {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_nodes(&self) -> usize {
        self.n_users + self.n_items
    }

    /// Number of stored (non-zero) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of `row` as `(column, value)`.
    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.row_entries(row)
            .find(|&(c, _)| c == col)
            .map_or(0.0, |(_, v)| v)
    }

    /// `A · x` for a `n_nodes × d` matrix.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n_nodes());
        let d = x.ncols();
        let mut out = Array2::zeros((self.n_nodes(), d));
        let src = x.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("standard layout");
        for r in 0..self.n_nodes() {
            let acc = &mut dst[r * d..(r + 1) * d];
            for (c, v) in self.row_entries(r) {
                for (a, b) in acc.iter_mut().zip(&src[c * d..(c + 1) * d]) {
                    *a += v * b;
                }
            }
        }
        out
    }

    /// Layer-mean propagation `(1/(L+1)) Σ_{k=0..L} A^k x`.
    ///
    /// The operator is symmetric, so the same call maps gradients with
    /// respect to its output back to gradients with respect to `x`.
    pub fn propagate_mean(&self, x: &Array2<f64>, layers: usize) -> Array2<f64> {
        let mut acc = x.clone();
        let mut cur = x.clone();
        for _ in 0..layers {
            cur = self.apply(&cur);
            acc += &cur;
        }
        acc /= (layers + 1) as f64;
        acc
    }

    /// Dense copy, for small instances and tests.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n_nodes();
        let mut out = Array2::zeros((n, n));
        for r in 0..n {
            for (c, v) in self.row_entries(r) {
                out[[r, c]] = v;
            }
        }
        out
    }
}

/// Builds the normalized adjacency of the training interactions.
///
/// A user without interactions is an error. Items may be isolated (an item
/// whose only interactions were held out for testing); their rows are empty.
pub fn build_norm_adjacency(ds: &InteractionDataset) -> Result<NormAdjacency> {
    let (n_users, n_items) = (ds.n_users(), ds.n_items());
    let n = n_users + n_items;
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, items) in ds.pos_sets().iter().enumerate() {
        if items.is_empty() {
            return Err(ModelError::ZeroDegree {
                node: format!("user {}", ds.user_ids()[u]),
            });
        }
        for &i in items {
            neighbors[u].push(n_users + i);
            neighbors[n_users + i].push(u);
        }
    }
    let degree: Vec<f64> = neighbors.iter().map(|nb| nb.len() as f64).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for (r, nb) in neighbors.iter_mut().enumerate() {
        nb.sort_unstable();
        for &c in nb.iter() {
            col_idx.push(c);
            values.push(1.0 / (degree[r] * degree[c]).sqrt());
        }
        row_ptr.push(col_idx.len());
    }
    Ok(NormAdjacency {
        n_users,
        n_items,
        row_ptr,
        col_idx,
        values,
    })
}

pub(crate) fn stack(users: &Array2<f64>, items: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(0), &[users.view(), items.view()])
        .expect("tables share a dimension")
        .as_standard_layout()
        .into_owned()
}

pub(crate) fn unstack(all: Array2<f64>, n_users: usize) -> (Array2<f64>, Array2<f64>) {
    let users = all.slice(s![..n_users, ..]).to_owned();
    let items = all.slice(s![n_users.., ..]).to_owned();
    (users, items)
}

/// LightGCN final embeddings: the mean of layers `0..=L` of
/// `e^k = A e^{k-1}`, split back into user and item blocks.
pub fn lightgcn_propagate(
    model: &EmbeddingModel,
    adj: &NormAdjacency,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if model.kind != ModelKind::LightGcn {
        return Err(ModelError::Config(
            "propagation applies to LightGCN models only".into(),
        ));
    }
    if adj.n_users() != model.n_users() || adj.n_items() != model.n_items() {
        return Err(ModelError::Config(format!(
            "adjacency is {}x{} but model is {}x{}",
            adj.n_users(),
            adj.n_items(),
            model.n_users(),
            model.n_items()
        )));
    }
    let out = adj.propagate_mean(&stack(&model.user_emb, &model.item_emb), model.layers);
    if !linalg::all_finite(out.iter()) {
        return Err(ModelError::NonFinite {
            context: "lightgcn propagation".into(),
            epoch: 0,
        });
    }
    Ok(unstack(out, model.n_users()))
}
