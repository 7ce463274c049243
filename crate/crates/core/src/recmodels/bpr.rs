use ndarray::Array2;

use crate::linalg::{dot, row, row_mut};

/// A training example: `user` prefers `pos` over `neg`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

/// `ln σ(x)`, stable for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean over `triples` of `-ln σ(s_ui - s_uj)`, accumulating its gradient
/// into the scoring tables.
pub(crate) fn ranking_loss_grad(
    users: &Array2<f64>,
    items: &Array2<f64>,
    triples: &[Triple],
    grad_users: &mut Array2<f64>,
    grad_items: &mut Array2<f64>,
) -> f64 {
    let inv = 1.0 / triples.len() as f64;
    let d = users.ncols();
    let mut loss = 0.0;
    let mut diff = vec![0.0; d];
    for t in triples {
        let eu = row(users, t.user);
        let ei = row(items, t.pos);
        let ej = row(items, t.neg);
        for k in 0..d {
            diff[k] = ei[k] - ej[k];
        }
        let x = dot(eu, &diff);
        loss -= log_sigmoid(x);
        // d/dx of -ln σ(x) is -σ(-x).
        let c = -sigmoid(-x) * inv;
        for (g, v) in row_mut(grad_users, t.user).iter_mut().zip(&diff) {
            *g += c * v;
        }
        for (g, v) in row_mut(grad_items, t.pos).iter_mut().zip(eu) {
            *g += c * v;
        }
        for (g, v) in row_mut(grad_items, t.neg).iter_mut().zip(eu) {
            *g -= c * v;
        }
    }
    loss * inv
}

/// Mean over `triples` of `l2 (|e_u|² + |e_i|² + |e_j|²)`, accumulating its
/// gradient.
pub(crate) fn l2_loss_grad(
    users: &Array2<f64>,
    items: &Array2<f64>,
    triples: &[Triple],
    l2: f64,
    grad_users: &mut Array2<f64>,
    grad_items: &mut Array2<f64>,
) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let inv = 1.0 / triples.len() as f64;
    let c = 2.0 * l2 * inv;
    let mut loss = 0.0;
    let mut add = |table: &Array2<f64>, grad: &mut Array2<f64>, r: usize| {
        let e = row(table, r);
        loss += dot(e, e);
        for (g, v) in row_mut(grad, r).iter_mut().zip(e) {
            *g += c * v;
        }
    };
    for t in triples {
        add(users, grad_users, t.user);
        add(items, grad_items, t.pos);
        add(items, grad_items, t.neg);
    }
    l2 * loss * inv
}

/// BPR objective of a matrix-factorization model on one batch:
/// mean `-ln σ(e_u·e_i − e_u·e_j) + l2 (|e_u|² + |e_i|² + |e_j|²)`.
pub fn bpr_loss(users: &Array2<f64>, items: &Array2<f64>, triples: &[Triple], l2: f64) -> f64 {
    bpr_loss_and_grad(users, items, triples, l2).0
}

/// [`bpr_loss`] with its gradient with respect to both tables.
pub fn bpr_loss_and_grad(
    users: &Array2<f64>,
    items: &Array2<f64>,
    triples: &[Triple],
    l2: f64,
) -> (f64, Array2<f64>, Array2<f64>) {
    let mut gu = Array2::zeros(users.raw_dim());
    let mut gi = Array2::zeros(items.raw_dim());
    if triples.is_empty() {
        return (0.0, gu, gi);
    }
    let rank = ranking_loss_grad(users, items, triples, &mut gu, &mut gi);
    let reg = l2_loss_grad(users, items, triples, l2, &mut gu, &mut gi);
    (rank + reg, gu, gi)
}
