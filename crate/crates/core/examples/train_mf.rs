//! Train BPR-MF on ML-100K with the default hyperparameters and report
//! leave-one-out metrics.
//!
//! cargo run --release --example train_mf -- [data/raw/ml-100k] [seed]

use std::path::PathBuf;
use std::time::Instant;

use unlearn_rec::dataio::{filter_min_interactions, leave_one_out_split, parse_raw, RawFormat};
use unlearn_rec::recmetrics::evaluate;
use unlearn_rec::recmodels::{init_model, train, ModelKind, TrainHyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = PathBuf::from(args.first().map_or("data/raw/ml-100k", String::as_str));
    let mut hp = TrainHyperparams::defaults_for(ModelKind::Mf);
    if let Some(s) = args.get(1) {
        hp.seed = s.parse()?;
    }

    let raw = parse_raw(&dir.join("u.data"), RawFormat::Ml100k)?;
    let ds = filter_min_interactions(&raw, 5)?;
    let split = leave_one_out_split(&ds, 99, 0)?;
    println!(
        "users={} items={} train={}",
        ds.n_users(),
        ds.n_items(),
        split.train.interactions().len()
    );

    let start = Instant::now();
    let model = init_model(ModelKind::Mf, ds.n_users(), ds.n_items(), &hp)?;
    let out = train(&model, &split, &hp)?;
    let report = evaluate(&out.model, None, &split, &[5, 10])?;
    println!(
        "final loss={:.4}  HR@5={:.4} NDCG@5={:.4}  HR@10={:.4} NDCG@10={:.4}  time={:.1}s",
        out.epoch_losses.last().copied().unwrap_or(f64::NAN),
        report.hr[&5],
        report.ndcg[&5],
        report.hr[&10],
        report.ndcg[&10],
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
