//! `gripdecode` command-line front-end.

mod commands;
mod config;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gripdecode::features::WaveletBand;
use gripdecode::Handedness;

use crate::config::RunConfig;

pub const OUT_DIR_ENV: &str = "GRIPDECODE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "gripdecode-out";

/// Bad flags, config or inputs. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "gripdecode", version, about = "Offline EEG grasp decoding: synthesize, preprocess, evaluate, ablate, compare")]
struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory. Falls back to the config, then $GRIPDECODE_OUT_DIR, then ./gripdecode-out.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for the evaluation grid. Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic four-class session and save it as an epoch file.
    Synth(SynthArgs),
    /// Resample, filter, normalize and optionally augment an epoch file.
    Preprocess(PreprocessArgs),
    /// Cross-validate every (pair, model) combination; writes results.csv, folds.csv and summary.json.
    Evaluate(EvaluateArgs),
    /// Repeat the evaluation on electrode subsets; writes ablation.csv and ablation.svg.
    Ablate(AblateArgs),
    /// Paired Wilcoxon tests and bootstrap summaries between results.csv files; writes stats.csv.
    Stats(StatsArgs),
    /// Validate a label-to-command lookup table and print the encoded frames.
    ActuateCheck(ActuateArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials_per_class: Option<usize>,
    /// 125 or 250 Hz.
    #[arg(long)]
    sample_rate: Option<f64>,
    /// Epoch file to write; defaults to synth.eege in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Defaults to preprocessed.eege in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    target_rate: Option<f64>,
    /// Per-class trial count after analogy augmentation.
    #[arg(long)]
    augment_target: Option<usize>,
    #[arg(long)]
    augment_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Epoch file. Without one, a synthetic session is generated.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Seed of the generated session when no input is given.
    #[arg(long)]
    synth_seed: Option<u64>,
    /// Use the epochs as loaded, without the filter/normalize chain.
    #[arg(long)]
    skip_preprocess: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Comma-separated: lda, svm-linear, svm-rbf, mlp, mdm, ts-svm.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Comma-separated, e.g. TG/PG,Open/Rest.
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    /// Number of folds.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    fold_seed: Option<u64>,
    /// Augment training folds to this many trials per class.
    #[arg(long)]
    augment_target: Option<usize>,
    /// Augment the whole pair before splitting instead of inside each fold.
    #[arg(long)]
    paper_order: bool,
    /// Wavelet coefficients feeding the CSP-WD features.
    #[arg(long, value_enum)]
    band: Option<BandArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum BandArg {
    Approx,
    ApproxDetail,
}

impl From<BandArg> for WaveletBand {
    fn from(b: BandArg) -> Self {
        match b {
            BandArg::Approx => WaveletBand::Approx,
            BandArg::ApproxDetail => WaveletBand::ApproxDetail,
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    eval: EvalArgs,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// Layout/combination TOML file; the built-in cap layout otherwise.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Comma-separated combination ids; must include 0.
    #[arg(long, value_delimiter = ',')]
    combinations: Option<Vec<u8>>,
    #[arg(long)]
    handedness: Option<Handedness>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Two or more results.csv files.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    inputs: Option<Vec<PathBuf>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Rows drawn from the first set in each bootstrap repetition.
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ActuateArgs {
    /// Lookup table TOML; the built-in placeholder table otherwise.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Comma-separated labels to encode; all four by default.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
}

fn apply_data(cfg: &mut RunConfig, a: DataArgs) {
    if a.input.is_some() {
        cfg.input.path = a.input;
    }
    if let Some(s) = a.synth_seed {
        cfg.synth.seed = s;
    }
    if a.skip_preprocess {
        cfg.preprocess.enabled = false;
    }
}

fn apply_eval(cfg: &mut RunConfig, a: EvalArgs) {
    let e = &mut cfg.evaluate;
    if let Some(m) = a.models {
        e.models = m;
    }
    if let Some(p) = a.pairs {
        e.pairs = p;
    }
    if let Some(k) = a.k {
        e.k = k;
    }
    if let Some(s) = a.fold_seed {
        e.fold_seed = s;
    }
    if a.augment_target.is_some() {
        e.augment_target = a.augment_target;
    }
    if a.paper_order {
        e.augment_order = gripdecode::eval::AugmentOrder::PaperOrder;
    }
    if let Some(b) = a.band {
        e.band = b.into();
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.out_dir.is_some() {
        cfg.output_dir = cli.out_dir;
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(
            std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        );
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }

    let command = match cli.command {
        Command::Synth(a) => {
            if let Some(s) = a.seed {
                cfg.synth.seed = s;
            }
            if let Some(n) = a.trials_per_class {
                cfg.synth.trials_per_class = n;
            }
            if let Some(r) = a.sample_rate {
                cfg.synth.sample_rate = r;
            }
            commands::Job::Synth { output: a.output }
        }
        Command::Preprocess(a) => {
            if a.input.is_some() {
                cfg.input.path = a.input;
            }
            if a.target_rate.is_some() {
                cfg.preprocess.target_rate = a.target_rate;
            }
            if a.augment_target.is_some() {
                cfg.preprocess.augment_target = a.augment_target;
            }
            if let Some(s) = a.augment_seed {
                cfg.preprocess.augment_seed = s;
            }
            commands::Job::Preprocess { output: a.output }
        }
        Command::Evaluate(a) => {
            apply_data(&mut cfg, a.data);
            apply_eval(&mut cfg, a.eval);
            commands::Job::Evaluate
        }
        Command::Ablate(a) => {
            apply_data(&mut cfg, a.data);
            apply_eval(&mut cfg, a.eval);
            if a.layout.is_some() {
                cfg.ablate.layout = a.layout;
            }
            if let Some(c) = a.combinations {
                cfg.ablate.combinations = c;
            }
            if let Some(h) = a.handedness {
                cfg.ablate.handedness = h;
            }
            commands::Job::Ablate
        }
        Command::Stats(a) => {
            if let Some(i) = a.inputs {
                cfg.stats.inputs = i;
            }
            if let Some(r) = a.reps {
                cfg.stats.reps = r;
            }
            if let Some(s) = a.subset {
                cfg.stats.subset = s;
            }
            if let Some(s) = a.seed {
                cfg.stats.seed = s;
            }
            commands::Job::Stats
        }
        Command::ActuateCheck(a) => {
            if a.table.is_some() {
                cfg.actuation.table = a.table;
            }
            commands::Job::ActuateCheck { labels: a.labels }
        }
    };

    match cfg.workers {
        Some(0) => Err(UsageError("--workers must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| commands::execute(&cfg, command)),
        None => commands::execute(&cfg, command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
