//! Config-driven experiment runs.
//!
//! `run_experiment` trains (or retrains), unlearns, evaluates and writes an
//! experiment directory; `run_attack` later reads that directory back and
//! appends attacker results to its log. Directory contents:
//!
//! ```text
//! config.json       the input config, byte for byte
//! resolved.json     every hyperparameter actually used
//! status            "complete", or "incomplete phase=<name>"
//! log.txt           key=value lines, appended to by later attacks
//! timing.log        wall_time_seconds of the unlearning phase
//! labels/           attribute labels (user_attr.tsv, attr_meta.json)
//! base/             checkpoint before unlearning (post-training methods)
//! model/            final checkpoint
//! user_final.f32    scoring user embeddings, little-endian f32, row-major
//! user_final.json   their shape
//! train_loss.tsv    per-epoch BPR loss of the base or retrained model
//! trace.tsv         unlearning loss trace
//! ```

mod config;
mod hist;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{self, AttackError, AttackReport};
use crate::dataio::{
    filter_min_interactions, leave_one_out_split, load_attributes, load_labels, load_split,
    parse_raw, save_labels, save_split, AttrFormat, AttributeLabels, DataError, EvalSplit,
    RawFormat,
};
use crate::recmetrics::{self, MetricError, RecReport};
use crate::recmodels::{
    self, build_norm_adjacency, decode_f32, encode_f32, init_model, save_checkpoint,
    EmbeddingModel, ModelError, ModelKind,
};
use crate::unlearning::{run_unlearn, TraceRow, UnlearnError};

pub use config::{AttackConfig, TrainOverrides, UnlearnConfig, UnlearnOverrides};
pub use hist::{histogram_counts, histogram_tsv};

/// Cutoffs reported for every run.
pub const CUTOFFS: [usize; 2] = [5, 10];
pub const RESULTS_ENV: &str = "UNLEARN_RESULTS_DIR";
pub const DEFAULT_RESULTS_DIR: &str = "exp_results";
pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_HIST_DIMS: usize = 8;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("[{phase}] {source}")]
    Phase {
        phase: &'static str,
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    /// 1 config, 2 data or i/o, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Data(_) | HarnessError::Io { .. } => 2,
            HarnessError::Numeric(_) => 3,
            HarnessError::Phase { source, .. } => source.exit_code(),
        }
    }

    fn in_phase(self, phase: &'static str) -> Self {
        match self {
            e @ HarnessError::Phase { .. } => e,
            e => HarnessError::Phase {
                phase,
                source: Box::new(e),
            },
        }
    }
}

impl From<DataError> for HarnessError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidArgument(_) => HarnessError::Config(e.to_string()),
            _ => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for HarnessError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) | ModelError::OutOfRange(_) => {
                HarnessError::Config(e.to_string())
            }
            ModelError::NonFinite { .. } => HarnessError::Numeric(e.to_string()),
            ModelError::ZeroDegree { .. } | ModelError::Io { .. } | ModelError::Checkpoint(_) => {
                HarnessError::Data(e.to_string())
            }
        }
    }
}

impl From<UnlearnError> for HarnessError {
    fn from(e: UnlearnError) -> Self {
        match e {
            UnlearnError::Model(m) => m.into(),
            UnlearnError::Config(_) => HarnessError::Config(e.to_string()),
            UnlearnError::NonFinite { .. } => HarnessError::Numeric(e.to_string()),
            UnlearnError::EmptyClass(_) | UnlearnError::Shape(_) => {
                HarnessError::Data(e.to_string())
            }
        }
    }
}

impl From<AttackError> for HarnessError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Config(_) => HarnessError::Config(e.to_string()),
            AttackError::NonFinite { .. } => HarnessError::Numeric(e.to_string()),
            _ => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for HarnessError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Model(m) => m.into(),
            MetricError::NonFiniteScore { .. } => HarnessError::Numeric(e.to_string()),
            MetricError::InvalidCutoff => HarnessError::Config(e.to_string()),
            _ => HarnessError::Data(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

trait PhaseExt<T> {
    fn phase(self, phase: &'static str) -> Result<T>;
}

impl<T, E: Into<HarnessError>> PhaseExt<T> for std::result::Result<T, E> {
    fn phase(self, phase: &'static str) -> Result<T> {
        self.map_err(|e| e.into().in_phase(phase))
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(io(path))
}

/// `$UNLEARN_RESULTS_DIR`, or `./exp_results`.
pub fn results_root() -> PathBuf {
    std::env::var_os(RESULTS_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_RESULTS_DIR))
}

/// Raw file names and defaults for a named dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub ratings: &'static str,
    pub format: RawFormat,
    pub attributes: &'static str,
    pub attr_format: AttrFormat,
    pub min_interactions: usize,
}

impl DatasetLayout {
    pub fn for_name(name: &str) -> Self {
        match name {
            "ml-100k" => Self {
                ratings: "u.data",
                format: RawFormat::Ml100k,
                attributes: "u.user",
                attr_format: AttrFormat::Ml100kUser,
                min_interactions: 5,
            },
            "ml-1m" => Self {
                ratings: "ratings.dat",
                format: RawFormat::Ml1m,
                attributes: "users.dat",
                attr_format: AttrFormat::Ml1mUser,
                min_interactions: 5,
            },
            "lfm-2b" => Self {
                ratings: "ratings.tsv",
                format: RawFormat::GenericTsv,
                attributes: "users.tsv",
                attr_format: AttrFormat::Tsv,
                min_interactions: 120,
            },
            _ => Self {
                ratings: "ratings.tsv",
                format: RawFormat::GenericTsv,
                attributes: "users.tsv",
                attr_format: AttrFormat::Tsv,
                min_interactions: 5,
            },
        }
    }
}

/// Inputs of [`preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOptions {
    pub raw: PathBuf,
    pub format: RawFormat,
    pub attributes: Option<(PathBuf, AttrFormat)>,
    pub min_interactions: usize,
    pub n_neg: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Parses, filters and splits a raw rating file into `out`, with labels if
/// an attribute file is given.
pub fn preprocess(opts: &PreprocessOptions) -> Result<(EvalSplit, Option<AttributeLabels>)> {
    let raw = parse_raw(&opts.raw, opts.format).phase("data")?;
    let ds = filter_min_interactions(&raw, opts.min_interactions).phase("data")?;
    let split = leave_one_out_split(&ds, opts.n_neg, opts.seed).phase("data")?;
    let labels = match &opts.attributes {
        Some((path, fmt)) => Some(load_attributes(path, *fmt, ds.user_ids(), None).phase("data")?),
        None => None,
    };
    save_split(&split, &opts.out).phase("data")?;
    if let Some(l) = &labels {
        save_labels(l, &opts.out).phase("data")?;
    }
    log::info!(
        "prepared {} users x {} items, {} training interactions -> {}",
        split.train.n_users(),
        split.train.n_items(),
        split.train.interactions().len(),
        opts.out.display()
    );
    Ok((split, labels))
}

/// Loads the split and labels named by `cfg`, preparing and caching them
/// under `<data_dir>/processed/` on first use.
pub fn load_dataset(cfg: &UnlearnConfig) -> Result<(EvalSplit, AttributeLabels)> {
    let dir = match &cfg.split_dir {
        Some(d) => d.clone(),
        None => {
            let layout = DatasetLayout::for_name(&cfg.dataset);
            let k = cfg.min_interactions.unwrap_or(layout.min_interactions);
            let dir = cfg.data_dir.join("processed").join(format!(
                "{}_k{k}_neg{}_seed{}",
                cfg.dataset, cfg.n_neg, cfg.split_seed
            ));
            if !dir.join("meta.json").exists() {
                let raw_dir = cfg.data_dir.join("raw").join(&cfg.dataset);
                let ratings = raw_dir.join(layout.ratings);
                if !ratings.exists() {
                    return Err(HarnessError::Data(format!(
                        "dataset {:?} not found: expected {}",
                        cfg.dataset,
                        ratings.display()
                    )));
                }
                preprocess(&PreprocessOptions {
                    raw: ratings,
                    format: layout.format,
                    attributes: Some((raw_dir.join(layout.attributes), layout.attr_format)),
                    min_interactions: k,
                    n_neg: cfg.n_neg,
                    seed: cfg.split_seed,
                    out: dir.clone(),
                })?;
            }
            dir
        }
    };
    let split = load_split(&dir)?;
    let labels = load_labels(&dir)?;
    if labels.n_users() != split.train.n_users() {
        return Err(HarnessError::Data(format!(
            "{} labels for {} users in {}",
            labels.n_users(),
            split.train.n_users(),
            dir.display()
        )));
    }
    Ok((split, labels))
}

fn fmt_report(r: &RecReport) -> String {
    let mut s = String::new();
    for k in r.ndcg.keys() {
        write!(s, " ndcg@{k}={:.6} hr@{k}={:.6}", r.ndcg[k], r.hr[k]).unwrap();
    }
    s
}

fn append_log(dir: &Path, line: &str) -> Result<()> {
    let path = dir.join("log.txt");
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(io(&path))?;
    writeln!(f, "{line}").map_err(io(&path))
}

fn set_status(dir: &Path, status: &str) -> Result<()> {
    write_file(&dir.join("status"), format!("{status}\n"))
}

/// Shape header for `user_final.f32`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingHeader {
    version: u32,
    rows: usize,
    cols: usize,
}

fn save_user_final(dir: &Path, users: &Array2<f64>) -> Result<()> {
    let header = EmbeddingHeader {
        version: crate::FORMAT_VERSION,
        rows: users.nrows(),
        cols: users.ncols(),
    };
    let mut json = serde_json::to_string_pretty(&header).expect("header serializes");
    json.push('\n');
    write_file(&dir.join("user_final.json"), json)?;
    write_file(&dir.join("user_final.f32"), encode_f32(users))
}

/// Scoring user embeddings and labels stored in an experiment directory.
pub fn load_user_final(dir: &Path) -> Result<(Array2<f64>, AttributeLabels)> {
    let missing =
        |what: &str| HarnessError::Data(format!("experiment {} has no {what}", dir.display()));
    let text = std::fs::read_to_string(dir.join("user_final.json"))
        .map_err(|_| missing("user_final.json"))?;
    let h: EmbeddingHeader = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Data(format!("user_final.json: {e}")))?;
    let bytes = std::fs::read(dir.join("user_final.f32")).map_err(|_| missing("user_final.f32"))?;
    let users = decode_f32(&bytes, h.rows, h.cols)?;
    let labels = load_labels(&dir.join("labels"))?;
    if labels.n_users() != users.nrows() {
        return Err(HarnessError::Data(format!(
            "{} labels for {} embedding rows",
            labels.n_users(),
            users.nrows()
        )));
    }
    Ok((users, labels))
}

fn trace_tsv(trace: &[TraceRow]) -> String {
    let mut s = String::from("step\tdist\treg\ttotal\n");
    for r in trace {
        writeln!(s, "{}\t{:e}\t{:e}\t{:e}", r.step, r.dist, r.reg, r.total).unwrap();
    }
    s
}

fn losses_tsv(losses: &[f64]) -> String {
    let mut s = String::from("epoch\tloss\n");
    for (e, l) in losses.iter().enumerate() {
        writeln!(s, "{e}\t{l:e}").unwrap();
    }
    s
}

/// Creates `<root>/<stem>`, or `<stem>-2`, `<stem>-3`, ... if taken.
fn fresh_dir(root: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(root).map_err(io(root))?;
    for n in 1.. {
        let name = if n == 1 {
            stem.to_string()
        } else {
            format!("{stem}-{n}")
        };
        let path = root.join(name);
        match std::fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(io(&path)(e)),
        }
    }
    unreachable!()
}

/// What [`run_experiment`] produced.
#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub dir: PathBuf,
    /// Ranking quality before unlearning, for post-training methods.
    pub base_report: Option<RecReport>,
    pub report: RecReport,
    pub wall_time_seconds: f64,
    pub trace: Vec<TraceRow>,
    pub model: EmbeddingModel,
}

#[derive(Serialize)]
struct Resolved<'a> {
    config: &'a UnlearnConfig,
    train: &'a recmodels::TrainHyperparams,
    unlearn: &'a crate::unlearning::UnlearnHyperparams,
    n_users: usize,
    n_items: usize,
    n_train: usize,
}

/// Runs `cfg` end to end into a new directory under `root`. `snapshot` is
/// the config text as given and is stored unchanged; `timestamp` names the
/// directory.
pub fn run_experiment(
    cfg: &UnlearnConfig,
    snapshot: &str,
    root: &Path,
    timestamp: &str,
) -> Result<ExperimentRecord> {
    if let Some(d) = &cfg.device {
        log::warn!("device {d:?} ignored: all computation runs on the CPU");
    }
    let train_hp = cfg.train_hyperparams()?;
    let un_hp = cfg.unlearn_hyperparams()?;
    let stem = format!(
        "{}_{}_{}_{}_{}",
        cfg.dataset, cfg.model, cfg.method, cfg.seed, timestamp
    );
    let dir = fresh_dir(root, &stem)?;
    write_file(&dir.join("config.json"), snapshot)?;
    set_status(&dir, "incomplete phase=data")?;

    let (split, labels) = load_dataset(cfg).map_err(|e| e.in_phase("data"))?;
    let resolved = Resolved {
        config: cfg,
        train: &train_hp,
        unlearn: &un_hp,
        n_users: split.train.n_users(),
        n_items: split.train.n_items(),
        n_train: split.train.interactions().len(),
    };
    let mut json = serde_json::to_string_pretty(&resolved).expect("resolved config serializes");
    json.push('\n');
    write_file(&dir.join("resolved.json"), json)?;
    save_labels(&labels, &dir.join("labels"))?;
    append_log(
        &dir,
        &format!(
            "event=start dataset={} model={} method={} seed={} n_users={} n_items={} n_train={} classes={}",
            cfg.dataset,
            cfg.model,
            cfg.method,
            cfg.seed,
            resolved.n_users,
            resolved.n_items,
            resolved.n_train,
            labels.class_names().join(",")
        ),
    )?;
    let adj = match cfg.model {
        ModelKind::LightGcn => Some(build_norm_adjacency(&split.train).phase("data")?),
        ModelKind::Mf => None,
    };

    let fresh = init_model(
        cfg.model,
        split.train.n_users(),
        split.train.n_items(),
        &train_hp,
    )
    .phase("train")?;
    let (start_model, base_report) = if cfg.method.trains_from_scratch() {
        (fresh, None)
    } else {
        set_status(&dir, "incomplete phase=train")?;
        log::info!(
            "training {} base model for {} epochs",
            cfg.model,
            train_hp.epochs
        );
        let out = recmodels::train(&fresh, &split, &train_hp).phase("train")?;
        save_checkpoint(&out.model, cfg.seed, &dir.join("base")).phase("train")?;
        write_file(&dir.join("train_loss.tsv"), losses_tsv(&out.epoch_losses))?;
        let rep =
            recmetrics::evaluate(&out.model, adj.as_ref(), &split, &CUTOFFS).phase("train")?;
        append_log(
            &dir,
            &format!(
                "event=base_train epochs={} final_loss={:e}{}",
                train_hp.epochs,
                out.epoch_losses.last().copied().unwrap_or(f64::NAN),
                fmt_report(&rep)
            ),
        )?;
        (out.model, Some(rep))
    };

    set_status(&dir, "incomplete phase=unlearn")?;
    log::info!("unlearning with {}", cfg.method);
    let result = run_unlearn(&start_model, &split, &labels, cfg.method, &train_hp, &un_hp)
        .phase("unlearn")?;
    write_file(
        &dir.join("timing.log"),
        format!("wall_time_seconds={:.6}\n", result.wall_time_seconds),
    )?;
    write_file(&dir.join("trace.tsv"), trace_tsv(&result.trace))?;
    if cfg.method.trains_from_scratch() {
        let losses: Vec<f64> = result.trace.iter().map(|r| r.reg).collect();
        write_file(&dir.join("train_loss.tsv"), losses_tsv(&losses))?;
    }
    let mut line = format!(
        "event=unlearn method={} rows={}",
        cfg.method,
        result.trace.len()
    );
    if let (Some(a), Some(b)) = (result.trace.first(), result.trace.last()) {
        write!(line, " dist_first={:e} dist_last={:e}", a.dist, b.dist).unwrap();
    }
    if let (Some(a), Some(b)) = (
        result.adversary_accuracy.first(),
        result.adversary_accuracy.last(),
    ) {
        write!(
            line,
            " adversary_acc_first={a:.6} adversary_acc_last={b:.6}"
        )
        .unwrap();
    }
    append_log(&dir, &line)?;

    set_status(&dir, "incomplete phase=evaluate")?;
    let (users, items) = result
        .model
        .final_embeddings(adj.as_ref())
        .phase("evaluate")?;
    let report =
        recmetrics::evaluate_embeddings(&users, &items, &split, &CUTOFFS).phase("evaluate")?;
    append_log(&dir, &format!("event=rec{}", fmt_report(&report)))?;

    set_status(&dir, "incomplete phase=persist")?;
    save_checkpoint(&result.model, cfg.seed, &dir.join("model")).phase("persist")?;
    save_user_final(&dir, &users)?;
    set_status(&dir, "complete")?;
    log::info!("experiment written to {}", dir.display());
    Ok(ExperimentRecord {
        dir,
        base_report,
        report,
        wall_time_seconds: result.wall_time_seconds,
        trace: result.trace,
        model: result.model,
    })
}

/// Resolves `experiment` against `root` unless it already names a
/// directory.
pub fn resolve_experiment(experiment: &Path, root: &Path) -> PathBuf {
    if experiment.is_dir() {
        experiment.to_path_buf()
    } else {
        root.join(experiment)
    }
}

fn check_complete(dir: &Path) -> Result<()> {
    let status = std::fs::read_to_string(dir.join("status")).map_err(|_| {
        HarnessError::Data(format!("{} is not an experiment directory", dir.display()))
    })?;
    if status.trim() != "complete" {
        return Err(HarnessError::Data(format!(
            "experiment {} is {}",
            dir.display(),
            status.trim()
        )));
    }
    Ok(())
}

/// Runs every configured attacker against the experiment's stored user
/// embeddings and appends one line per fold and one summary line per
/// attacker to its log.
pub fn run_attack(cfg: &AttackConfig, root: &Path) -> Result<Vec<AttackReport>> {
    if cfg.attackers.is_empty() {
        return Err(HarnessError::Config("no attackers configured".into()));
    }
    let dir = resolve_experiment(&cfg.experiment, root);
    check_complete(&dir).phase("attack")?;
    let (users, labels) = load_user_final(&dir).phase("attack")?;
    let params = cfg.params();
    let mut reports = Vec::with_capacity(cfg.attackers.len());
    for &kind in &cfg.attackers {
        log::info!(
            "attacking {} with {kind} over {} seeds",
            dir.display(),
            params.seeds.len()
        );
        let r = attack::attack(&users, &labels, kind, &params).phase("attack")?;
        for f in &r.folds {
            let auc = f.auc.map_or("undefined".to_string(), |a| format!("{a:.6}"));
            append_log(
                &dir,
                &format!(
                    "event=attack_fold attacker={kind} seed={} accuracy={:.6} precision={:.6} recall={:.6} auc={auc}",
                    f.seed, f.accuracy, f.precision, f.recall
                ),
            )?;
        }
        append_log(
            &dir,
            &format!(
                "event=attack attacker={kind} seeds={} train_frac={} n_train={} n_test={} accuracy={:.6} precision={:.6} recall={:.6} auc={:.6}",
                params.seeds.len(),
                params.train_frac,
                r.n_train,
                r.n_test,
                r.accuracy,
                r.precision,
                r.recall,
                r.auc
            ),
        )?;
        reports.push(r);
    }
    Ok(reports)
}

/// Histogram TSV of the experiment's user embeddings per attribute class,
/// over `dims` (default: the first eight).
pub fn export_embedding_histograms(
    dir: &Path,
    n_bins: usize,
    dims: Option<&[usize]>,
) -> Result<String> {
    check_complete(dir)?;
    let (users, labels) = load_user_final(dir)?;
    let dims: Vec<usize> = match dims {
        Some(d) => d.to_vec(),
        None => (0..users.ncols().min(DEFAULT_HIST_DIMS)).collect(),
    };
    if let Some(&bad) = dims.iter().find(|&&d| d >= users.ncols()) {
        return Err(HarnessError::Config(format!(
            "dimension {bad} out of range for {} columns",
            users.ncols()
        )));
    }
    let members = labels.members();
    let columns: Vec<(usize, Vec<Vec<f64>>)> = dims
        .iter()
        .map(|&d| {
            (
                d,
                members
                    .iter()
                    .map(|m| m.iter().map(|&u| users[[u, d]]).collect())
                    .collect(),
            )
        })
        .collect();
    histogram_tsv(&columns, labels.class_names(), n_bins)
}

/// Reads `key=value` pairs from the log lines whose `event` matches.
pub fn read_log_events(dir: &Path, event: &str) -> Result<Vec<Vec<(String, String)>>> {
    let path = dir.join("log.txt");
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    Ok(text
        .lines()
        .map(|l| {
            l.split_whitespace()
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect::<Vec<_>>()
        })
        .filter(|kv| kv.first().is_some_and(|(k, v)| k == "event" && v == event))
        .collect())
}

/// Wall time recorded in `timing.log`.
pub fn read_wall_time(dir: &Path) -> Result<f64> {
    let path = dir.join("timing.log");
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    text.trim()
        .strip_prefix("wall_time_seconds=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| HarnessError::Data(format!("malformed {}", path.display())))
}
