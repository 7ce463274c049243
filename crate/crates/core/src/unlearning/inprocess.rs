//! In-training baselines: BPR training with an MMD penalty (`retrain`) or
//! with a gradient-reversal adversary (`adv`).

use std::time::Instant;

use ndarray::Array2;

use super::{
    mmd_by_class_grad, resolve_bandwidth, Result, TraceRow, UnlearnHyperparams, UnlearnResult,
};
use crate::dataio::{AttributeLabels, EvalSplit};
use crate::linalg::{gather_rows, row, row_mut};
use crate::nn::{Mlp, MlpAdam};
use crate::recmodels::{
    self, init_model, EmbeddingModel, ModelKind, TrainHook, TrainHyperparams, Triple,
};
use crate::rng::{self, stream};

/// Adds `weight · MMD` on the scoring user embeddings to every batch. The
/// gradient is taken once per epoch on all users and reused for that
/// epoch's batches; the bandwidth follows the median heuristic each epoch.
struct MmdPenalty<'a> {
    labels: &'a AttributeLabels,
    hp: &'a UnlearnHyperparams,
    grad: Option<Array2<f64>>,
    value: f64,
    per_epoch: Vec<f64>,
}

impl TrainHook for MmdPenalty<'_> {
    fn on_epoch_start(&mut self, _epoch: usize, user_final: &Array2<f64>) -> recmodels::Result<()> {
        let w = self.hp.retrain_trade_off;
        if w == 0.0 {
            self.per_epoch.push(0.0);
            return Ok(());
        }
        let bw = resolve_bandwidth(self.hp.bandwidth, user_final);
        let (v, g) = mmd_by_class_grad(
            user_final,
            self.labels.labels(),
            self.labels.n_classes(),
            bw,
        )
        .map_err(|e| recmodels::ModelError::Config(e.to_string()))?;
        self.value = v;
        self.grad = Some(g * w);
        self.per_epoch.push(v);
        Ok(())
    }

    fn on_batch(
        &mut self,
        _: &[Triple],
        _: &Array2<f64>,
        grad: &mut Array2<f64>,
    ) -> recmodels::Result<f64> {
        match &self.grad {
            Some(g) => {
                *grad += g;
                Ok(self.hp.retrain_trade_off * self.value)
            }
            None => Ok(0.0),
        }
    }
}

fn check_labels(split: &EvalSplit, labels: &AttributeLabels) -> Result<()> {
    if labels.n_users() != split.train.n_users() {
        return Err(super::UnlearnError::Shape(format!(
            "{} labels for {} users",
            labels.n_users(),
            split.train.n_users()
        )));
    }
    Ok(())
}

/// Trains a fresh model whose per-batch loss adds
/// `retrain_trade_off · MMD` between the attribute classes.
pub fn retrain_with_penalty(
    kind: ModelKind,
    split: &EvalSplit,
    labels: &AttributeLabels,
    train_hp: &TrainHyperparams,
    hp: &UnlearnHyperparams,
) -> Result<UnlearnResult> {
    hp.validate()?;
    check_labels(split, labels)?;
    let start = Instant::now();
    let model = init_model(kind, split.train.n_users(), split.train.n_items(), train_hp)?;
    let mut hook = MmdPenalty {
        labels,
        hp,
        grad: None,
        value: 0.0,
        per_epoch: Vec::new(),
    };
    let out = recmodels::train_with_hook(&model, &split.train, train_hp, &mut hook)?;
    let wall = start.elapsed().as_secs_f64();
    let trace = (0..out.epoch_losses.len())
        .map(|e| TraceRow {
            step: e,
            dist: hook.per_epoch[e],
            reg: out.epoch_losses[e],
            total: out.epoch_losses[e] + out.hook_losses[e],
        })
        .collect();
    Ok(UnlearnResult {
        model: out.model,
        wall_time_seconds: wall,
        trace,
        adversary_accuracy: Vec::new(),
    })
}

/// Attribute classifier on the batch users' embeddings. Its parameters
/// descend the cross-entropy; the embeddings receive the input gradient
/// scaled by `-lambda`.
pub(crate) struct Adversary<'a> {
    labels: &'a AttributeLabels,
    lambda: f64,
    net: Mlp,
    opt: MlpAdam,
    ce_sum: f64,
    correct: usize,
    seen: usize,
    batches: usize,
    pub(crate) ce_per_epoch: Vec<f64>,
    pub(crate) acc_per_epoch: Vec<f64>,
}

impl<'a> Adversary<'a> {
    pub(crate) fn new(labels: &'a AttributeLabels, dim: usize, hp: &UnlearnHyperparams) -> Self {
        let mut rng = rng::stream_rng(hp.seed, stream::ADVERSARY);
        let net = Mlp::new(&[dim, hp.adv_hidden, labels.n_classes()], &mut rng);
        let opt = MlpAdam::new(&net, hp.adv_learning_rate);
        Self {
            labels,
            lambda: hp.retrain_trade_off,
            net,
            opt,
            ce_sum: 0.0,
            correct: 0,
            seen: 0,
            batches: 0,
            ce_per_epoch: Vec::new(),
            acc_per_epoch: Vec::new(),
        }
    }
}

impl TrainHook for Adversary<'_> {
    fn on_batch(
        &mut self,
        batch: &[Triple],
        user_final: &Array2<f64>,
        grad: &mut Array2<f64>,
    ) -> recmodels::Result<f64> {
        let mut users: Vec<usize> = batch.iter().map(|t| t.user).collect();
        users.sort_unstable();
        users.dedup();
        let x = gather_rows(user_final, &users);
        let y: Vec<usize> = users.iter().map(|&u| self.labels.labels()[u]).collect();
        let (ce, grads, gx, correct) = self.net.loss_and_grads(&x, &y, 0.0);
        self.opt.step(&mut self.net, &grads);
        if self.lambda != 0.0 {
            for (r, &u) in users.iter().enumerate() {
                for (g, v) in row_mut(grad, u).iter_mut().zip(row(&gx, r)) {
                    *g -= self.lambda * v;
                }
            }
        }
        self.ce_sum += ce;
        self.correct += correct;
        self.seen += users.len();
        self.batches += 1;
        Ok(-self.lambda * ce)
    }

    fn on_epoch_end(&mut self, _epoch: usize, _: &EmbeddingModel) -> recmodels::Result<()> {
        self.ce_per_epoch
            .push(self.ce_sum / self.batches.max(1) as f64);
        self.acc_per_epoch
            .push(self.correct as f64 / self.seen.max(1) as f64);
        self.ce_sum = 0.0;
        self.correct = 0;
        self.seen = 0;
        self.batches = 0;
        Ok(())
    }
}

/// Trains a fresh model jointly with an adversarial attribute classifier
/// through gradient reversal of strength `retrain_trade_off`.
pub fn adv_in_training(
    kind: ModelKind,
    split: &EvalSplit,
    labels: &AttributeLabels,
    train_hp: &TrainHyperparams,
    hp: &UnlearnHyperparams,
) -> Result<UnlearnResult> {
    hp.validate()?;
    check_labels(split, labels)?;
    let start = Instant::now();
    let model = init_model(kind, split.train.n_users(), split.train.n_items(), train_hp)?;
    let mut adv = Adversary::new(labels, train_hp.dim, hp);
    let out = recmodels::train_with_hook(&model, &split.train, train_hp, &mut adv)?;
    let wall = start.elapsed().as_secs_f64();
    let trace = (0..out.epoch_losses.len())
        .map(|e| TraceRow {
            step: e,
            dist: adv.ce_per_epoch[e],
            reg: out.epoch_losses[e],
            total: out.epoch_losses[e] + out.hook_losses[e],
        })
        .collect();
    Ok(UnlearnResult {
        model: out.model,
        wall_time_seconds: wall,
        trace,
        adversary_accuracy: adv.acc_per_epoch,
    })
}
