//! Small fully connected classifiers: ReLU hidden layers, softmax output,
//! cross-entropy loss. Shared by the MLP attacker and the in-training
//! adversary.

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, Uniform};

use crate::optim::Adam;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// `weights[l]` is `in × out`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden.., classes]`. Weights and biases are drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
            weights.push(Array2::from_shape_simple_fn((w[0], w[1]), || {
                dist.sample(rng)
            }));
            biases.push(Array1::from_shape_simple_fn(w[1], || dist.sample(rng)));
        }
        Self { weights, biases }
    }

    pub fn n_classes(&self) -> usize {
        self.biases.last().map_or(0, |b| b.len())
    }

    /// Activations of every layer; the last entry holds class probabilities.
    fn forward(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.clone()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].dot(w) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                softmax_rows(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward(x).pop().expect("at least one layer")
    }

    /// Mean cross-entropy over the rows of `x`, plus `weight_decay/2 · Σ|W|²`.
    /// Returns the loss, parameter gradients, the gradient with respect to
    /// `x`, and the number of rows classified correctly.
    pub fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        y: &[usize],
        weight_decay: f64,
    ) -> (f64, MlpGrads, Array2<f64>, usize) {
        let n = x.nrows();
        assert_eq!(n, y.len());
        let acts = self.forward(x);
        let probs = acts.last().expect("output layer");
        let mut loss = 0.0;
        let mut correct = 0;
        let mut delta = probs.clone();
        for (r, &c) in y.iter().enumerate() {
            let row = probs.row(r);
            loss -= row[c].max(1e-300).ln();
            if argmax(row.as_slice().expect("row-major")) == c {
                correct += 1;
            }
            delta[[r, c]] -= 1.0;
        }
        delta /= n as f64;
        loss /= n as f64;

        let depth = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); depth];
        let mut gb = vec![Array1::zeros(0); depth];
        for l in (0..depth).rev() {
            let mut g = acts[l].t().dot(&delta);
            if weight_decay > 0.0 {
                g.scaled_add(weight_decay, &self.weights[l]);
                loss += 0.5 * weight_decay * self.weights[l].iter().map(|v| v * v).sum::<f64>();
            }
            gw[l] = g;
            gb[l] = delta.sum_axis(Axis(0));
            let mut back = delta.dot(&self.weights[l].t());
            if l > 0 {
                // ReLU derivative, taken from the post-activation values.
                back.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = back;
        }
        (
            loss,
            MlpGrads {
                weights: gw,
                biases: gb,
            },
            delta,
            correct,
        )
    }
}

/// One Adam state per parameter tensor.
#[derive(Debug, Clone)]
pub struct MlpAdam {
    weights: Vec<Adam>,
    biases: Vec<Adam>,
}

impl MlpAdam {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| Adam::new(w.len(), learning_rate))
                .collect(),
            biases: net
                .biases
                .iter()
                .map(|b| Adam::new(b.len(), learning_rate))
                .collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &MlpGrads) {
        for (l, opt) in self.weights.iter_mut().enumerate() {
            opt.step(
                net.weights[l].as_slice_mut().expect("standard layout"),
                grads.weights[l].as_slice().expect("standard layout"),
            );
        }
        for (l, opt) in self.biases.iter_mut().enumerate() {
            opt.step(
                net.biases[l].as_slice_mut().expect("standard layout"),
                grads.biases[l].as_slice().expect("standard layout"),
            );
        }
    }
}

pub fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
