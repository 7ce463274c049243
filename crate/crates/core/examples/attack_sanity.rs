//! Attribute inference on synthetic users: a planted attribute signal is
//! recovered, shuffled labels fall back to chance.
//!
//! cargo run --release --example attack_sanity

use unlearn_rec::attack::{attack, shuffled_labels, AttackParams, AttackerKind};
use unlearn_rec::dataio::synthetic::{generate, SyntheticConfig};
use unlearn_rec::dataio::{
    filter_min_interactions, leave_one_out_split, parse_attributes, AttrFormat,
};
use unlearn_rec::recmodels::{init_model, train, ModelKind, TrainHyperparams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SyntheticConfig::default());
    let ds = filter_min_interactions(&data.interactions, 5)?;
    let split = leave_one_out_split(&ds, 99, 0)?;
    let labels = parse_attributes(&data.attributes_tsv(), AttrFormat::Tsv, ds.user_ids(), None)?;

    let mut hp = TrainHyperparams::defaults_for(ModelKind::Mf);
    hp.epochs = 100;
    let model = train(
        &init_model(ModelKind::Mf, ds.n_users(), ds.n_items(), &hp)?,
        &split,
        &hp,
    )?
    .model;

    let params = AttackParams::default();
    for kind in [AttackerKind::Mlp, AttackerKind::Gbt] {
        let real = attack(&model.user_emb, &labels, kind, &params)?;
        let noise = attack(&model.user_emb, &shuffled_labels(&labels, 7), kind, &params)?;
        println!(
            "{kind:?}: true labels auc={:.4} acc={:.4} | shuffled auc={:.4} acc={:.4}",
            real.auc, real.accuracy, noise.auc, noise.accuracy
        );
    }
    Ok(())
}
