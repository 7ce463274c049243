//! LightGCN on ML-100K: train, evaluate through the propagated embeddings,
//! then run D2D on the ego user table and attack the propagated users.
//!
//! cargo run --release --example lightgcn -- [data/raw/ml-100k] [epochs]

use std::path::PathBuf;

use unlearn_rec::attack::{attack, AttackParams, AttackerKind};
use unlearn_rec::dataio::{
    filter_min_interactions, leave_one_out_split, load_attributes, parse_raw, AttrFormat, RawFormat,
};
use unlearn_rec::recmetrics::evaluate;
use unlearn_rec::recmodels::{
    build_norm_adjacency, init_model, train, EmbeddingModel, ModelKind, NormAdjacency,
    TrainHyperparams,
};
use unlearn_rec::unlearning::{run_unlearn, UnlearnHyperparams, UnlearnMethod};
use unlearn_rec::{AttributeLabels, EvalSplit};

fn show(
    name: &str,
    m: &EmbeddingModel,
    adj: &NormAdjacency,
    split: &EvalSplit,
    labels: &AttributeLabels,
) {
    let rec = evaluate(m, Some(adj), split, &[10]).expect("evaluable");
    let (users, _) = m.final_embeddings(Some(adj)).expect("propagation");
    let auc = attack(&users, labels, AttackerKind::Mlp, &AttackParams::default())
        .expect("attack")
        .auc;
    println!(
        "{name:<8} NDCG@10={:.4} HR@10={:.4} mlp auc={auc:.4}",
        rec.ndcg[&10], rec.hr[&10]
    );
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = PathBuf::from(args.first().map_or("data/raw/ml-100k", String::as_str));
    let mut hp = TrainHyperparams::defaults_for(ModelKind::LightGcn);
    if let Some(e) = args.get(1) {
        hp.epochs = e.parse()?;
    }

    let raw = parse_raw(&dir.join("u.data"), RawFormat::Ml100k)?;
    let ds = filter_min_interactions(&raw, 5)?;
    let split = leave_one_out_split(&ds, 99, 0)?;
    let labels = load_attributes(
        &dir.join("u.user"),
        AttrFormat::Ml100kUser,
        ds.user_ids(),
        None,
    )?;
    let adj = build_norm_adjacency(&split.train)?;

    let base = train(
        &init_model(ModelKind::LightGcn, ds.n_users(), ds.n_items(), &hp)?,
        &split,
        &hp,
    )?
    .model;
    show("original", &base, &adj, &split, &labels);

    let out = run_unlearn(
        &base,
        &split,
        &labels,
        UnlearnMethod::D2d,
        &hp,
        &UnlearnHyperparams::default(),
    )?;
    show("d2d", &out.model, &adj, &split, &labels);
    println!(
        "unlearning took {:.2}s over {} steps",
        out.wall_time_seconds,
        out.trace.len()
    );
    Ok(())
}
