use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use unlearn_rec::dataio::{AttrFormat, RawFormat, DEFAULT_TEST_NEGATIVES};
use unlearn_rec::harness::{self, AttackConfig, HarnessError, PreprocessOptions, UnlearnConfig};

#[derive(Parser)]
#[command(
    name = "unlearn-rec",
    version,
    about = "Attribute unlearning experiments for recommenders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, unlearn, evaluate and write an experiment directory.
    Run {
        #[arg(long)]
        config: Vec<PathBuf>,
    },
    /// Attack a finished experiment and append the results to its log.
    Attack {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write per-class embedding histograms of an experiment as TSV.
    ExportHist {
        #[arg(long)]
        exp: PathBuf,
        #[arg(long, default_value_t = harness::DEFAULT_BINS)]
        bins: usize,
        /// Comma-separated dimensions (default: the first eight).
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter and split a raw rating file into the on-disk layout.
    Preprocess {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        format: RawFormat,
        #[arg(long = "min-interactions")]
        min_interactions: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        attributes: Option<PathBuf>,
        #[arg(long = "attr-format", default_value = "tsv")]
        attr_format: AttrFormat,
        #[arg(long = "n-neg", default_value_t = DEFAULT_TEST_NEGATIVES)]
        n_neg: usize,
    },
}

fn run(cmd: Command) -> Result<(), HarnessError> {
    let root = harness::results_root();
    match cmd {
        Command::Run { config } => {
            if config.is_empty() {
                return Err(HarnessError::Config("--config is required".into()));
            }
            for path in config {
                let (cfg, text) = UnlearnConfig::load(&path)?;
                let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S").to_string();
                let rec = harness::run_experiment(&cfg, &text, &root, &stamp)?;
                println!(
                    "{}\tndcg@10={:.4}\thr@10={:.4}\twall_time={:.3}s",
                    rec.dir.display(),
                    rec.report.ndcg[&10],
                    rec.report.hr[&10],
                    rec.wall_time_seconds
                );
            }
        }
        Command::Attack { config } => {
            let cfg = AttackConfig::load(&config)?;
            for r in harness::run_attack(&cfg, &root)? {
                println!(
                    "{}\tauc={:.4}\taccuracy={:.4}\tprecision={:.4}\trecall={:.4}",
                    r.kind, r.auc, r.accuracy, r.precision, r.recall
                );
            }
        }
        Command::ExportHist {
            exp,
            bins,
            dims,
            out,
        } => {
            let dir = harness::resolve_experiment(&exp, &root);
            let tsv = harness::export_embedding_histograms(&dir, bins, dims.as_deref())?;
            match out {
                Some(p) => std::fs::write(&p, tsv)
                    .map_err(|source| HarnessError::Io { path: p, source })?,
                None => print!("{tsv}"),
            }
        }
        Command::Preprocess {
            raw,
            format,
            min_interactions,
            out,
            seed,
            attributes,
            attr_format,
            n_neg,
        } => {
            let (split, labels) = harness::preprocess(&PreprocessOptions {
                raw,
                format,
                attributes: attributes.map(|p| (p, attr_format)),
                min_interactions,
                n_neg,
                seed,
                out: out.clone(),
            })?;
            println!(
                "{}\tusers={}\titems={}\ttrain={}\tclasses={}",
                out.display(),
                split.train.n_users(),
                split.train.n_items(),
                split.train.interactions().len(),
                labels.map_or(0, |l| l.n_classes())
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
