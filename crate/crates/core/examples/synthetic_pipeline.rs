//! The full experiment harness on generated heavy users, filtered at 120
//! interactions: preprocess, train + unlearn, attack, export histograms.
//! Everything is written under a temporary results root.
//!
//! cargo run --release --example synthetic_pipeline -- [d2d|u2u|retrain|adv|original]

use std::fs;

use unlearn_rec::dataio::synthetic::{generate, SyntheticConfig};
use unlearn_rec::harness::{
    export_embedding_histograms, read_log_events, run_attack, run_experiment, AttackConfig,
    UnlearnConfig,
};
use unlearn_rec::{ModelKind, UnlearnMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let method: UnlearnMethod = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "d2d".into())
        .parse()?;
    let work = tempfile::tempdir()?;
    let raw = work.path().join("data/raw/lfm-2b");
    fs::create_dir_all(&raw)?;
    let data = generate(&SyntheticConfig::heavy_users(0));
    fs::write(raw.join("ratings.tsv"), data.ratings_tsv())?;
    fs::write(raw.join("users.tsv"), data.attributes_tsv())?;

    let mut cfg = UnlearnConfig::new(method, ModelKind::Mf, "lfm-2b");
    cfg.data_dir = work.path().join("data");
    cfg.train.epochs = Some(40);
    let root = work.path().join("results");
    let rec = run_experiment(&cfg, &cfg.to_json(), &root, "example")?;
    if let Some(base) = &rec.base_report {
        println!(
            "base      NDCG@10={:.4} HR@10={:.4}",
            base.ndcg[&10], base.hr[&10]
        );
    }
    println!(
        "{:<9} NDCG@10={:.4} HR@10={:.4}",
        method.to_string(),
        rec.report.ndcg[&10],
        rec.report.hr[&10]
    );
    println!("unlearning wall time {:.3}s", rec.wall_time_seconds);

    for r in run_attack(&AttackConfig::new(rec.dir.clone()), &root)? {
        println!("{:?} auc={:.4} accuracy={:.4}", r.kind, r.auc, r.accuracy);
    }
    let tsv = export_embedding_histograms(&rec.dir, 20, Some(&[0, 1]))?;
    println!("histogram rows: {}", tsv.lines().count() - 1);
    println!(
        "log events: {}",
        read_log_events(&rec.dir, "attack_fold")?.len()
    );

    let mut files: Vec<String> = fs::read_dir(&rec.dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!(
        "experiment dir {}: {}",
        rec.dir.file_name().unwrap().to_string_lossy(),
        files.join(" ")
    );
    Ok(())
}
