//! The in-training baselines on ML-100K: MMD-penalized retraining and
//! adversarial training, with attack results and wall times.
//!
//! cargo run --release --example baselines -- [data/raw/ml-100k]

use std::path::PathBuf;

use unlearn_rec::attack::{attack, AttackParams, AttackerKind};
use unlearn_rec::dataio::{
    filter_min_interactions, leave_one_out_split, load_attributes, parse_raw, AttrFormat, RawFormat,
};
use unlearn_rec::recmetrics::evaluate;
use unlearn_rec::recmodels::{init_model, ModelKind, TrainHyperparams};
use unlearn_rec::unlearning::{run_unlearn, UnlearnHyperparams, UnlearnMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/raw/ml-100k".into()),
    );
    let raw = parse_raw(&dir.join("u.data"), RawFormat::Ml100k)?;
    let ds = filter_min_interactions(&raw, 5)?;
    let split = leave_one_out_split(&ds, 99, 0)?;
    let labels = load_attributes(
        &dir.join("u.user"),
        AttrFormat::Ml100kUser,
        ds.user_ids(),
        None,
    )?;
    let hp = TrainHyperparams::defaults_for(ModelKind::Mf);
    let uhp = UnlearnHyperparams::default();
    // Only the kind matters for methods that train from scratch.
    let template = init_model(ModelKind::Mf, ds.n_users(), ds.n_items(), &hp)?;

    for method in [UnlearnMethod::Retrain, UnlearnMethod::Adv] {
        let out = run_unlearn(&template, &split, &labels, method, &hp, &uhp)?;
        let rec = evaluate(&out.model, None, &split, &[10])?;
        let mlp = attack(
            &out.model.user_emb,
            &labels,
            AttackerKind::Mlp,
            &AttackParams::default(),
        )?;
        let gbt = attack(
            &out.model.user_emb,
            &labels,
            AttackerKind::Gbt,
            &AttackParams::default(),
        )?;
        println!(
            "{method:<8} time={:.1}s NDCG@10={:.4} HR@10={:.4} mlp auc={:.4} gbt auc={:.4}",
            out.wall_time_seconds, rec.ndcg[&10], rec.hr[&10], mlp.auc, gbt.auc
        );
        if let (Some(a), Some(b)) = (
            out.adversary_accuracy.first(),
            out.adversary_accuracy.last(),
        ) {
            println!("         adversary accuracy {a:.3} -> {b:.3}");
        }
    }
    Ok(())
}
