//! Train MF on ML-100K, then compare D2D and U2U unlearning: attacker AUC
//! before and after, recommendation quality, and wall time.
//!
//! cargo run --release --example d2d_vs_u2u -- [data/raw/ml-100k]

use std::path::PathBuf;

use unlearn_rec::attack::{attack, AttackParams, AttackerKind};
use unlearn_rec::dataio::{
    filter_min_interactions, leave_one_out_split, load_attributes, parse_raw, AttrFormat, RawFormat,
};
use unlearn_rec::recmetrics::evaluate;
use unlearn_rec::recmodels::{init_model, train, EmbeddingModel, ModelKind, TrainHyperparams};
use unlearn_rec::unlearning::{run_unlearn, UnlearnHyperparams, UnlearnMethod};
use unlearn_rec::AttributeLabels;

fn report(
    name: &str,
    model: &EmbeddingModel,
    split: &unlearn_rec::EvalSplit,
    labels: &AttributeLabels,
) {
    let rec = evaluate(model, None, split, &[10]).expect("evaluable");
    let params = AttackParams::default();
    let mlp = attack(&model.user_emb, labels, AttackerKind::Mlp, &params).expect("attack");
    let gbt = attack(&model.user_emb, labels, AttackerKind::Gbt, &params).expect("attack");
    println!(
        "{name:<9} NDCG@10={:.4} HR@10={:.4}  mlp auc={:.4} acc={:.4}  gbt auc={:.4} acc={:.4}",
        rec.ndcg[&10], rec.hr[&10], mlp.auc, mlp.accuracy, gbt.auc, gbt.accuracy
    );
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/raw/ml-100k".into()),
    );
    let k: usize = std::env::var("MIN_K")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(5);
    let raw = parse_raw(&dir.join("u.data"), RawFormat::Ml100k)?;
    let ds = filter_min_interactions(&raw, k)?;
    let split = leave_one_out_split(&ds, 99, 0)?;
    let labels = load_attributes(
        &dir.join("u.user"),
        AttrFormat::Ml100kUser,
        ds.user_ids(),
        None,
    )?;

    let hp = TrainHyperparams::defaults_for(ModelKind::Mf);
    let base = train(
        &init_model(ModelKind::Mf, ds.n_users(), ds.n_items(), &hp)?,
        &split,
        &hp,
    )?
    .model;
    report("original", &base, &split, &labels);

    let uhp = UnlearnHyperparams::default();
    for method in [UnlearnMethod::D2d, UnlearnMethod::U2u] {
        let out = run_unlearn(&base, &split, &labels, method, &hp, &uhp)?;
        let first = out.trace.first().map_or(0.0, |r| r.dist);
        let last = out.trace.last().map_or(0.0, |r| r.dist);
        println!(
            "{method}: dist {first:.5} -> {last:.5} in {:.2}s",
            out.wall_time_seconds
        );
        report(method.as_str(), &out.model, &split, &labels);
    }
    Ok(())
}
