use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::adjacency::{stack, unstack};
use super::bpr::{l2_loss_grad, ranking_loss_grad, Triple};
use super::{
    build_norm_adjacency, EmbeddingModel, ModelError, ModelKind, Result, TrainHyperparams,
};
use crate::dataio::{EvalSplit, InteractionDataset};
use crate::optim::Adam;
use crate::rng::{self, stream};

/// Trained model with per-epoch mean losses.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Mean BPR objective (ranking + L2) per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss contributed by the hook per epoch.
    pub hook_losses: Vec<f64>,
}

/// Extra terms attached to BPR training, expressed on the scoring user
/// embeddings (the propagated finals for LightGCN).
pub trait TrainHook {
    fn on_epoch_start(&mut self, _epoch: usize, _user_final: &Array2<f64>) -> Result<()> {
        Ok(())
    }

    /// Adds this batch's gradient contribution with respect to the scoring
    /// user embeddings and returns the loss it adds.
    fn on_batch(
        &mut self,
        _batch: &[Triple],
        _user_final: &Array2<f64>,
        _grad_user_final: &mut Array2<f64>,
    ) -> Result<f64> {
        Ok(0.0)
    }

    /// Sees the model after the epoch's last update.
    fn on_epoch_end(&mut self, _epoch: usize, _model: &EmbeddingModel) -> Result<()> {
        Ok(())
    }
}

/// Plain BPR training.
pub struct NoHook;

impl TrainHook for NoHook {}

/// Trains `model` on the training half of `split` with mini-batch BPR and
/// Adam. Deterministic given `hp.seed`.
pub fn train(
    model: &EmbeddingModel,
    split: &EvalSplit,
    hp: &TrainHyperparams,
) -> Result<TrainOutcome> {
    train_with_hook(model, &split.train, hp, &mut NoHook)
}

fn sample_epoch(
    pairs: &[(usize, usize)],
    ds: &InteractionDataset,
    neg_per_pos: usize,
    rng: &mut rng::Rng,
) -> Vec<Triple> {
    let n_items = ds.n_items();
    let mut triples = Vec::with_capacity(pairs.len() * neg_per_pos);
    for &(user, pos) in pairs {
        let seen = ds.positives(user);
        for _ in 0..neg_per_pos {
            let neg = loop {
                let j = rng.random_range(0..n_items);
                if !seen.contains(&j) {
                    break j;
                }
            };
            triples.push(Triple { user, pos, neg });
        }
    }
    triples.shuffle(rng);
    triples
}

pub fn train_with_hook(
    model: &EmbeddingModel,
    train: &InteractionDataset,
    hp: &TrainHyperparams,
    hook: &mut dyn TrainHook,
) -> Result<TrainOutcome> {
    hp.validate()?;
    if model.n_users() != train.n_users() || model.n_items() != train.n_items() {
        return Err(ModelError::Config(format!(
            "model is {}x{} but data is {}x{}",
            model.n_users(),
            model.n_items(),
            train.n_users(),
            train.n_items()
        )));
    }
    let pairs = train.positive_pairs();
    if pairs.is_empty() {
        return Err(ModelError::Config("no training interactions".into()));
    }
    if let Some(u) = (0..train.n_users()).find(|&u| train.positives(u).len() >= train.n_items()) {
        return Err(ModelError::Config(format!(
            "user {} interacted with every item; no negatives to sample",
            train.user_ids()[u]
        )));
    }
    let adj = match model.kind {
        ModelKind::LightGcn => Some(build_norm_adjacency(train)?),
        ModelKind::Mf => None,
    };

    let mut model = model.clone();
    let mut rng = rng::stream_rng(hp.seed, stream::TRAIN_SAMPLING);
    let mut opt_users = Adam::new(model.user_emb.len(), hp.learning_rate);
    let mut opt_items = Adam::new(model.item_emb.len(), hp.learning_rate);
    let mut grad_users = Array2::zeros(model.user_emb.raw_dim());
    let mut grad_items = Array2::zeros(model.item_emb.raw_dim());
    let mut epoch_losses = Vec::with_capacity(hp.epochs);
    let mut hook_losses = Vec::with_capacity(hp.epochs);

    let user_final = |m: &EmbeddingModel| -> Array2<f64> {
        match &adj {
            None => m.user_emb.clone(),
            Some(a) => {
                unstack(
                    a.propagate_mean(&stack(&m.user_emb, &m.item_emb), m.layers),
                    m.n_users(),
                )
                .0
            }
        }
    };

    for epoch in 0..hp.epochs {
        hook.on_epoch_start(epoch, &user_final(&model))?;
        let triples = sample_epoch(&pairs, train, hp.neg_per_pos, &mut rng);
        let (mut loss_sum, mut hook_sum, mut batches) = (0.0, 0.0, 0usize);
        for batch in triples.chunks(hp.batch_size) {
            grad_users.fill(0.0);
            grad_items.fill(0.0);
            let (rank, extra) = match &adj {
                None => {
                    let rank = ranking_loss_grad(
                        &model.user_emb,
                        &model.item_emb,
                        batch,
                        &mut grad_users,
                        &mut grad_items,
                    );
                    let extra = hook.on_batch(batch, &model.user_emb, &mut grad_users)?;
                    (rank, extra)
                }
                Some(a) => {
                    let finals =
                        a.propagate_mean(&stack(&model.user_emb, &model.item_emb), model.layers);
                    let (fu, fi) = unstack(finals, model.n_users());
                    let rank = ranking_loss_grad(&fu, &fi, batch, &mut grad_users, &mut grad_items);
                    let extra = hook.on_batch(batch, &fu, &mut grad_users)?;
                    let back = a.propagate_mean(&stack(&grad_users, &grad_items), model.layers);
                    let (gu, gi) = unstack(back, model.n_users());
                    grad_users = gu;
                    grad_items = gi;
                    (rank, extra)
                }
            };
            let reg = l2_loss_grad(
                &model.user_emb,
                &model.item_emb,
                batch,
                hp.l2_weight,
                &mut grad_users,
                &mut grad_items,
            );
            let loss = rank + reg;
            if !loss.is_finite() || !extra.is_finite() {
                return Err(ModelError::NonFinite {
                    context: "training loss".into(),
                    epoch,
                });
            }
            opt_users.step(
                model.user_emb.as_slice_mut().expect("standard layout"),
                grad_users.as_slice().expect("standard layout"),
            );
            opt_items.step(
                model.item_emb.as_slice_mut().expect("standard layout"),
                grad_items.as_slice().expect("standard layout"),
            );
            loss_sum += loss;
            hook_sum += extra;
            batches += 1;
        }
        if !model.is_finite() {
            return Err(ModelError::NonFinite {
                context: "embeddings".into(),
                epoch,
            });
        }
        epoch_losses.push(loss_sum / batches as f64);
        hook_losses.push(hook_sum / batches as f64);
        hook.on_epoch_end(epoch, &model)?;
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
        hook_losses,
    })
}
