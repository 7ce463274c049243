//! NDCG@10 / HR@10 on the held-out items after every few epochs of BPR-MF.
//!
//! cargo run --release --example learning_curve -- [data/raw/ml-100k] [epochs] [every]

use std::path::PathBuf;

use unlearn_rec::dataio::{
    filter_min_interactions, leave_one_out_split, parse_raw, EvalSplit, RawFormat,
};
use unlearn_rec::recmetrics::evaluate;
use unlearn_rec::recmodels::{
    self, init_model, EmbeddingModel, ModelKind, TrainHook, TrainHyperparams,
};

struct Curve<'a> {
    split: &'a EvalSplit,
    every: usize,
}

impl TrainHook for Curve<'_> {
    fn on_epoch_end(&mut self, epoch: usize, model: &EmbeddingModel) -> recmodels::Result<()> {
        if (epoch + 1).is_multiple_of(self.every) {
            let r = evaluate(model, None, self.split, &[10]).expect("evaluable split");
            println!(
                "epoch={:<4} HR@10={:.4} NDCG@10={:.4}",
                epoch + 1,
                r.hr[&10],
                r.ndcg[&10]
            );
        }
        Ok(())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = PathBuf::from(args.first().map_or("data/raw/ml-100k", String::as_str));
    let mut hp = TrainHyperparams::defaults_for(ModelKind::Mf);
    if let Some(e) = args.get(1) {
        hp.epochs = e.parse()?;
    }
    let every = args.get(2).map_or(Ok(20), |s| s.parse())?;
    for (key, slot) in [("L2", &mut hp.l2_weight), ("LR", &mut hp.learning_rate)] {
        if let Ok(v) = std::env::var(key) {
            *slot = v.parse()?;
        }
    }
    if let Ok(v) = std::env::var("DIM") {
        hp.dim = v.parse()?;
    }

    let raw = parse_raw(&dir.join("u.data"), RawFormat::Ml100k)?;
    let ds = filter_min_interactions(&raw, 5)?;
    let split = leave_one_out_split(&ds, 99, 0)?;
    let model = init_model(ModelKind::Mf, ds.n_users(), ds.n_items(), &hp)?;
    recmodels::train_with_hook(
        &model,
        &split.train,
        &hp,
        &mut Curve {
            split: &split,
            every,
        },
    )?;
    Ok(())
}
