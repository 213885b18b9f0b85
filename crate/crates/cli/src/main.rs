mod commands;
mod run_manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zssl_core::Protocol;

/// Exit status for bad input files or failed validation.
pub const EXIT_INPUT: u8 = 2;
/// Exit status for malformed command lines.
pub const EXIT_USAGE: u8 = 64;
/// Exit status for numeric failures (divergence, failed gradient checks).
pub const EXIT_NUMERIC: u8 = 70;

#[derive(Parser, Debug)]
#[command(name = "zssl", version, about = "Zero-shot sign recognition from hand keypoints")]
struct Cli {
    /// Worker threads for extraction and protocol runs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0, env = "ZS_JOBS")]
    jobs: usize,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write pooled skeleton feature vectors for every sample of a dataset.
    Extract(ExtractArgs),
    /// Train a projection on every sample of a dataset and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint, or train and evaluate over repeated class splits.
    Eval(EvalArgs),
    /// Run the feature-family ablation grid.
    Ablate(AblateArgs),
    /// Compare every backward pass against finite differences.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    P1,
    P2,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::P1 => Protocol::P1,
            ProtocolArg::P2 => Protocol::P2,
        }
    }
}

/// Options shared by commands that train.
#[derive(Args, Debug, Clone)]
pub struct ExperimentArgs {
    /// key = value config file; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seed for splits, initialisation and shuffling.
    #[arg(long, env = "ZS_SEED")]
    pub seed: Option<u64>,
    /// Feature families, e.g. `dist,ang,svd,deep`.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// `cosine` or `mse`.
    #[arg(long)]
    pub loss: Option<String>,
    /// Weight of the reconstruction term.
    #[arg(long)]
    pub lambda_recon: Option<f64>,
    /// Width of the hidden projection layer.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Replacement class-embedding file (defaults to the manifest's).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output TSV: id, label, then the feature values.
    #[arg(long)]
    pub out: PathBuf,
    /// Skeleton families to extract.
    #[arg(long, default_value = "dist,ang,svd")]
    pub features: String,
    /// Pool frames by `mean` or `max`.
    #[arg(long, default_value = "mean")]
    pub aggregation: String,
    /// Wrist-centre and scale-normalise each hand first.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV (defaults to `<out>.loss.csv`).
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
    /// Train only on the seen classes of this protocol's split for `--seed`,
    /// leaving the rest for `eval --checkpoint`.
    #[arg(long, value_enum)]
    pub split: Option<ProtocolArg>,
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Evaluate this checkpoint on the classes it was not trained on.
    #[arg(long, conflicts_with = "runs")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "p1")]
    pub protocol: ProtocolArg,
    /// Independent splits to average over.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output prefix; writes `<out>.json`, `<out>.csv` and `<out>.run.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "p1,p2")]
    pub protocols: Vec<ProtocolArg>,
    /// Restrict to these grid rows, e.g. `dist,svd,dist+ang+svd+deep`.
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<String>>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output prefix; writes `<out>.json`, `<out>.csv` and `<out>.run.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub exp: ExperimentArgs,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Random instances per component.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, env = "ZS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub classes: usize,
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 24)]
    pub frames: usize,
    /// Snippet vector length; 0 writes no snippet files.
    #[arg(long, default_value_t = 64)]
    pub deep_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub latent_rank: usize,
    #[arg(long, default_value_t = 0.1)]
    pub signal_scale: f64,
    #[arg(long, env = "ZS_SEED", default_value_t = 0)]
    pub seed: u64,
}

/// The error chain joined by `: `, skipping causes their parent already
/// quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if !prev.contains(&s) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&s);
        }
        prev = s;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    let result = match cli.command {
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
