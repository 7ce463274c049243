//! Gradient-boosted regression trees on the logistic (binary) or softmax
//! (multi-class) loss, with second-order leaf values and exact greedy
//! splits.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{AttackError, Classifier, Result};
use crate::nn::softmax_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian mass in each child.
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 4,
            shrinkage: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    /// Row indices sorted by each feature.
    order: &'a [Vec<usize>],
    g: &'a [f64],
    h: &'a [f64],
    p: &'a GbtParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&self, rows: &[bool]) -> f64 {
        let (mut g, mut h) = (0.0, 0.0);
        for (i, _) in rows.iter().enumerate().filter(|(_, &r)| r) {
            g += self.g[i];
            h += self.h[i];
        }
        -self.p.shrinkage * g / (h + self.p.lambda)
    }

    fn build(&mut self, rows: Vec<bool>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(0.0));
        let split = if depth < self.p.max_depth {
            self.best_split(&rows)
        } else {
            None
        };
        match split {
            None => self.nodes[id] = Node::Leaf(self.leaf(&rows)),
            Some((feature, threshold)) => {
                let go_left: Vec<bool> = (0..rows.len())
                    .map(|i| rows[i] && self.x[[i, feature]] < threshold)
                    .collect();
                let go_right: Vec<bool> = (0..rows.len()).map(|i| rows[i] && !go_left[i]).collect();
                let left = self.build(go_left, depth + 1);
                let right = self.build(go_right, depth + 1);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    /// Highest-gain `(feature, threshold)` with positive gain, scanning
    /// features in order and thresholds at midpoints of distinct values.
    fn best_split(&self, rows: &[bool]) -> Option<(usize, f64)> {
        let lambda = self.p.lambda;
        let (mut gt, mut ht) = (0.0, 0.0);
        for (i, _) in rows.iter().enumerate().filter(|(_, &r)| r) {
            gt += self.g[i];
            ht += self.h[i];
        }
        let parent = gt * gt / (ht + lambda);
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, sorted) in self.order.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            let mut prev: Option<usize> = None;
            for &i in sorted.iter().filter(|&&i| rows[i]) {
                if let Some(pi) = prev {
                    let (a, b) = (self.x[[pi, f]], self.x[[i, f]]);
                    let (gr, hr) = (gt - gl, ht - hl);
                    if a < b && hl >= self.p.min_child_weight && hr >= self.p.min_child_weight {
                        let gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                        if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                            best = Some((gain, f, 0.5 * (a + b)));
                        }
                    }
                }
                gl += self.g[i];
                hl += self.h[i];
                prev = Some(i);
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Boosted ensemble: one tree per round for two classes, one per class per
/// round otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GbtAttacker {
    n_classes: usize,
    base: Vec<f64>,
    trees: Vec<Vec<Tree>>,
}

impl GbtAttacker {
    fn margins(&self, x: &Array2<f64>) -> Array2<f64> {
        let k = self.base.len();
        let mut m = Array2::from_shape_fn((x.nrows(), k), |(_, c)| self.base[c]);
        for round in &self.trees {
            for (r, row) in x.rows().into_iter().enumerate() {
                let row = row.to_vec();
                for (c, t) in round.iter().enumerate() {
                    m[[r, c]] += t.predict(&row);
                }
            }
        }
        m
    }

    pub fn n_trees(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }
}

impl Classifier for GbtAttacker {
    fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let m = self.margins(x);
        if self.n_classes == 2 {
            Array2::from_shape_fn((x.nrows(), 2), |(r, c)| {
                let p1 = 1.0 / (1.0 + (-m[[r, 0]]).exp());
                if c == 1 {
                    p1
                } else {
                    1.0 - p1
                }
            })
        } else {
            let mut p = m;
            softmax_rows(&mut p);
            p
        }
    }
}

/// Fits the ensemble starting from the log class prior, so rounds without
/// a useful split leave predictions at the prior.
pub fn train_gbt_attacker(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    p: &GbtParams,
) -> Result<GbtAttacker> {
    super::check_training_set(x, y, n_classes)?;
    if !(p.shrinkage > 0.0 && p.lambda >= 0.0 && p.min_child_weight >= 0.0) {
        return Err(AttackError::Config("invalid boosting parameters".into()));
    }
    let n = x.nrows();
    let mut counts = vec![0usize; n_classes];
    for &c in y {
        counts[c] += 1;
    }
    let prior: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let base: Vec<f64> = if n_classes == 2 {
        vec![(prior[1] / prior[0]).ln()]
    } else {
        prior.iter().map(|q| q.ln()).collect()
    };
    let k = base.len();
    let order: Vec<Vec<usize>> = (0..x.ncols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut model = GbtAttacker {
        n_classes,
        base,
        trees: Vec::with_capacity(p.rounds),
    };
    let mut margin = Array2::from_shape_fn((n, k), |(_, c)| model.base[c]);
    let (mut g, mut h) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..p.rounds {
        let probs = if n_classes == 2 {
            margin.mapv(|m| 1.0 / (1.0 + (-m).exp()))
        } else {
            let mut q = margin.clone();
            softmax_rows(&mut q);
            q
        };
        let mut round = Vec::with_capacity(k);
        for c in 0..k {
            let target = if n_classes == 2 { 1 } else { c };
            for i in 0..n {
                let pi = probs[[i, c]];
                g[i] = pi - if y[i] == target { 1.0 } else { 0.0 };
                h[i] = (pi * (1.0 - pi)).max(1e-16);
            }
            let mut b = Builder {
                x,
                order: &order,
                g: &g,
                h: &h,
                p,
                nodes: Vec::new(),
            };
            b.build(vec![true; n], 0);
            round.push(Tree { nodes: b.nodes });
        }
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            for (c, t) in round.iter().enumerate() {
                margin[[i, c]] += t.predict(&row);
            }
        }
        model.trees.push(round);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_of_first_feature() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 {
                s * (1.0 + i as f64 * 0.01)
            } else {
                ((i * 7 + j) as f64).sin()
            }
        });
        let y: Vec<usize> = (0..40).map(|i| usize::from(i % 2 == 0)).collect();
        let p = GbtParams {
            rounds: 10,
            ..Default::default()
        };
        let m = train_gbt_attacker(&x, &y, 2, &p).unwrap();
        let probs = m.predict_proba(&x);
        for (i, &c) in y.iter().enumerate() {
            assert_eq!(usize::from(probs[[i, 1]] > 0.5), c);
        }
    }

    #[test]
    fn constant_features_predict_prior() {
        let x = Array2::from_elem((10, 2), 0.5);
        let y = [0, 0, 0, 1, 1, 1, 1, 1, 1, 1];
        let m = train_gbt_attacker(&x, &y, 2, &GbtParams::default()).unwrap();
        let p = m.predict_proba(&x);
        for r in 0..10 {
            assert!((p[[r, 1]] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn multiclass_fits() {
        let x = Array2::from_shape_fn((30, 1), |(i, _)| (i % 3) as f64);
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let m = train_gbt_attacker(&x, &y, 3, &GbtParams::default()).unwrap();
        assert_eq!(m.n_trees(), 300);
        let p = m.predict_proba(&x);
        for (r, &c) in y.iter().enumerate() {
            assert_eq!(crate::nn::argmax(p.row(r).as_slice().unwrap()), c);
        }
    }
}
