//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any failed. Criteria 3 to 8 need
//! MovieLens 100K under `data/raw/ml-100k` (see `scripts/fetch_ml100k.sh`).

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use unlearn_rec::dataio::{AttrFormat, RawFormat};
use unlearn_rec::harness::{
    histogram_counts, preprocess, read_wall_time, run_attack, run_experiment, AttackConfig,
    ExperimentRecord, PreprocessOptions, UnlearnConfig,
};
use unlearn_rec::{AttackReport, AttackerKind, ModelKind, UnlearnMethod};

use common::props::*;
use common::{gradients, oracles};

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

struct Suite {
    outcomes: Vec<Outcome>,
}

impl Suite {
    fn record(&mut self, id: &'static str, pass: bool, detail: String) {
        println!(
            "criterion {id}: {} | {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        self.outcomes.push(Outcome { id, pass, detail });
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn all_ok(checks: &[(&str, oracles::Check)]) -> Result<(), String> {
    for (name, c) in checks {
        if let Err(e) = c {
            return Err(format!("{name}: {e}"));
        }
    }
    Ok(())
}

fn criterion_1(s: &mut Suite) {
    let (res, t) = timed(|| {
        all_ok(&[
            ("ndcg/hr", oracles::check_metric_closed_forms()),
            ("auc", oracles::check_auc_brute_force()),
            ("mmd", oracles::check_mmd_oracle()),
        ])
    });
    let fast = t < Duration::from_secs(1);
    let detail = match &res {
        Ok(()) => format!(
            "closed forms, AUC and MMD oracles agree to 1e-12 in {:.3}s (limit 1s)",
            t.as_secs_f64()
        ),
        Err(e) => e.clone(),
    };
    s.record("1", res.is_ok() && fast, detail);
}

fn criterion_2(s: &mut Suite) {
    let (res, t) = timed(|| {
        all_ok(&[
            ("bpr", gradients::check_bpr()),
            ("d2d", gradients::check_mmd()),
            ("u2u", gradients::check_u2u()),
            ("regularizer", gradients::check_regularizer()),
        ])
    });
    let fast = t < Duration::from_secs(10);
    let detail = match &res {
        Ok(()) => format!(
            "BPR, MMD, U2U and regularizer gradients within {} of central differences (step {}) in {:.3}s (limit 10s)",
            gradients::TOL,
            gradients::STEP,
            t.as_secs_f64()
        ),
        Err(e) => e.clone(),
    };
    s.record("2", res.is_ok() && fast, detail);
}

fn run_props<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> PropResult,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: 64,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn criterion_9(s: &mut Suite) {
    let results = [
        run_props(
            "negative purity",
            (raw_ratings(), 1usize..6, any::<u64>()),
            |(r, n, seed)| prop_split_purity(r, n, seed),
        ),
        run_props(
            "fixed-point filtering",
            (raw_ratings(), 1usize..6),
            |(r, k)| prop_fixed_point_filtering(r, k),
        ),
        run_props(
            "propagation linearity",
            (bipartite(), 0usize..4, -4.0f64..4.0, any::<u64>()),
            |(ds, l, a, seed)| prop_propagation_linear(ds, l, a, seed),
        ),
        run_props("spectral bound", bipartite(), prop_spectral_bound),
        run_props(
            "metric monotonicity",
            prop::collection::vec(1usize..=100, 1..50),
            prop_metric_monotone,
        ),
        run_props(
            "score-order invariance",
            (-100i32..100, prop::collection::vec(-100i32..100, 0..99)),
            |(p, n)| prop_score_order_invariance(p, n),
        ),
        run_props(
            "mmd symmetry",
            (
                prop::collection::vec(-3.0f64..3.0, 1..12),
                prop::collection::vec(-3.0f64..3.0, 1..12),
                0.2f64..4.0,
            ),
            |(x, y, s)| {
                let d = 1 + x.len().min(y.len()) % 3;
                if x.len() < d || y.len() < d {
                    return Ok(());
                }
                prop_mmd_symmetric(x, y, d, s)
            },
        ),
        run_props(
            "method identities",
            (labels_strategy(), any::<u64>()),
            |(l, seed)| prop_method_identities(l, seed),
        ),
        run_props(
            "histogram conservation",
            (
                prop::collection::vec(-5.0f64..5.0, 1..40),
                prop::collection::vec(-5.0f64..5.0, 1..40),
                1usize..20,
            ),
            |(a, b, bins)| {
                let (edges, counts) = histogram_counts(&[a.clone(), b.clone()], bins).unwrap();
                prop_assert_eq!(edges.len(), bins + 1);
                prop_assert_eq!(counts[0].iter().sum::<usize>(), a.len());
                prop_assert_eq!(counts[1].iter().sum::<usize>(), b.len());
                Ok(())
            },
        ),
    ];
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let detail = if failures.is_empty() {
        format!("{} property suites x 64 cases", results.len())
    } else {
        failures
            .iter()
            .map(|f| f.as_str())
            .collect::<Vec<_>>()
            .join("; ")
    };
    s.record("9", failures.is_empty(), detail);
}

/// Everything needed for the ML-100K criteria.
struct Ml100k {
    tmp: tempfile::TempDir,
    split: PathBuf,
}

impl Ml100k {
    fn prepare(raw: &Path) -> Self {
        let tmp = tempfile::tempdir().expect("temp dir");
        let split = tmp.path().join("split");
        preprocess(&opts(raw, &split)).expect("ML-100K preprocessing");
        Self { tmp, split }
    }

    fn config(&self, method: UnlearnMethod, seed: u64) -> UnlearnConfig {
        let mut c = UnlearnConfig::new(method, ModelKind::Mf, "ml-100k");
        c.seed = seed;
        c.split_dir = Some(self.split.clone());
        c
    }

    fn run(&self, method: UnlearnMethod, seed: u64, root: &str) -> (ExperimentRecord, Duration) {
        let cfg = self.config(method, seed);
        let (rec, t) = timed(|| {
            run_experiment(
                &cfg,
                &cfg.to_json(),
                &self.tmp.path().join(root),
                "acceptance",
            )
        });
        (
            rec.unwrap_or_else(|e| panic!("{method} seed {seed}: {e}")),
            t,
        )
    }

    fn attack(&self, rec: &ExperimentRecord, kinds: &[AttackerKind]) -> Vec<AttackReport> {
        let mut c = AttackConfig::new(rec.dir.clone());
        c.attackers = kinds.to_vec();
        run_attack(&c, self.tmp.path()).expect("attack")
    }
}

fn opts(raw: &Path, out: &Path) -> PreprocessOptions {
    PreprocessOptions {
        raw: raw.join("u.data"),
        format: RawFormat::Ml100k,
        attributes: Some((raw.join("u.user"), AttrFormat::Ml100kUser)),
        min_interactions: 5,
        n_neg: 99,
        seed: 0,
        out: out.to_path_buf(),
    }
}

fn ndcg10(r: &ExperimentRecord) -> f64 {
    r.report.ndcg[&10]
}

/// Files under `dir` except the wall-clock timing, by relative path.
fn artifacts(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "timing.log") {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).expect("readable file"),
                );
            }
        }
    }
    out
}

fn diff(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Vec<String> {
    let mut bad: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    bad.extend(
        b.keys()
            .filter(|k| !a.contains_key(*k))
            .map(|k| k.display().to_string()),
    );
    bad
}

fn ml100k_criteria(s: &mut Suite, raw: &Path) {
    let data = Ml100k::prepare(raw);

    // 3: base quality.
    let (original, t_orig) = data.run(UnlearnMethod::Original, 0, "main");
    let (hr, nd) = (original.report.hr[&10], ndcg10(&original));
    s.record(
        "3",
        hr >= 0.55 && nd >= 0.30 && t_orig <= Duration::from_secs(15 * 60),
        format!(
            "HR@10 {hr:.4} (>= 0.55), NDCG@10 {nd:.4} (>= 0.30), training {:.1}s (limit 900s)",
            t_orig.as_secs_f64()
        ),
    );

    // 4: leakage before unlearning.
    let orig_attack = data.attack(&original, &[AttackerKind::Mlp, AttackerKind::Gbt]);
    let mlp0 = orig_attack[0].auc;
    s.record(
        "4",
        mlp0 >= 0.62,
        format!("MLP AUC on Original {mlp0:.4} (>= 0.62), 5 seeds"),
    );

    // 5: D2D.
    let (d2d, _) = data.run(UnlearnMethod::D2d, 0, "main");
    let d2d_attack = data.attack(&d2d, &[AttackerKind::Mlp, AttackerKind::Gbt]);
    let (m, g) = (d2d_attack[0].auc, d2d_attack[1].auc);
    let rel = (ndcg10(&d2d) - nd).abs() / nd;
    let wall_d2d = read_wall_time(&d2d.dir).expect("timing");
    s.record(
        "5",
        m <= 0.60 && g <= 0.60 && rel <= 0.08 && wall_d2d <= 120.0,
        format!(
            "MLP AUC {m:.4}, GBT AUC {g:.4} (<= 0.60); NDCG@10 {:.4} vs {nd:.4}, {:.2}% change (<= 8%); unlearning {wall_d2d:.2}s (limit 120s)",
            ndcg10(&d2d),
            100.0 * rel
        ),
    );

    // 6: efficiency ordering.
    let (u2u, _) = data.run(UnlearnMethod::U2u, 0, "main");
    let (retrain, _) = data.run(UnlearnMethod::Retrain, 0, "main");
    let (adv, _) = data.run(UnlearnMethod::Adv, 0, "main");
    let w = |r: &ExperimentRecord| read_wall_time(&r.dir).expect("timing");
    let (wu, wr, wa) = (w(&u2u), w(&retrain), w(&adv));
    s.record(
        "6",
        wall_d2d < wr && wr < wa && wu < wr,
        format!(
            "d2d {wall_d2d:.2}s < retrain {wr:.2}s < adv {wa:.2}s; u2u {wu:.2}s < retrain (d2d < u2u {})",
            if wall_d2d < wu { "also holds" } else { "does not hold, allowed" }
        ),
    );

    // 7: U2U costs more ranking quality than D2D, per seed.
    let mut rows = vec![(0, ndcg10(&u2u), ndcg10(&d2d))];
    for seed in 1..3 {
        let (u, _) = data.run(UnlearnMethod::U2u, seed, "seeds");
        let (d, _) = data.run(UnlearnMethod::D2d, seed, "seeds");
        rows.push((seed, ndcg10(&u), ndcg10(&d)));
    }
    s.record(
        "7",
        rows.iter().all(|&(_, u, d)| u < d),
        rows.iter()
            .map(|(seed, u, d)| format!("seed {seed}: U2U {u:.4} vs D2D {d:.4}"))
            .collect::<Vec<_>>()
            .join("; "),
    );

    // 8: determinism of every persisted stage.
    let split_again = data.tmp.path().join("split-again");
    preprocess(&opts(raw, &split_again)).expect("preprocessing rerun");
    let mut bad = diff(&artifacts(&data.split), &artifacts(&split_again));
    let (d2d_again, _) = data.run(UnlearnMethod::D2d, 0, "rerun");
    data.attack(&d2d_again, &[AttackerKind::Mlp, AttackerKind::Gbt]);
    bad.extend(diff(&artifacts(&d2d.dir), &artifacts(&d2d_again.dir)));
    let (adv_again, _) = data.run(UnlearnMethod::Adv, 0, "rerun");
    bad.extend(diff(&artifacts(&adv.dir), &artifacts(&adv_again.dir)));
    let n_files =
        artifacts(&d2d.dir).len() + artifacts(&adv.dir).len() + artifacts(&data.split).len();
    s.record(
        "8",
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "split, d2d (with attacks) and adv reruns byte-identical across {n_files} files"
            )
        } else {
            format!("differing files: {}", bad.join(", "))
        },
    );
}

fn main() {
    let mut s = Suite {
        outcomes: Vec::new(),
    };
    let start = Instant::now();
    criterion_1(&mut s);
    criterion_2(&mut s);
    match common::ml100k_raw() {
        Some(raw) => ml100k_criteria(&mut s, &raw),
        None => {
            for id in ["3", "4", "5", "6", "7", "8"] {
                s.record(
                    id,
                    false,
                    "ML-100K not found under data/raw/ml-100k; run scripts/fetch_ml100k.sh".into(),
                );
            }
        }
    }
    criterion_9(&mut s);
    s.outcomes.sort_by_key(|o| o.id.parse::<u32>().unwrap_or(0));
    let failed: Vec<&Outcome> = s.outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        s.outcomes.len() - failed.len(),
        s.outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        for o in &failed {
            println!("  failed {}: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
