mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use retention_lab::energy::Objective;
use retention_lab::Error;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  other failure (I/O, simulation)
  2  usage, parse or configuration error
  3  missing input file
  4  schema mismatch (dataset, model or result file)
  5  feature catalog version mismatch";

#[derive(Parser, Debug)]
#[command(name = "retention-lab", version, about = "Relaxed-retention STT-RAM L1 experiments", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// INI experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long, global = true, env = "RETENTION_LAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Worker threads for labeling and policy runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObjectiveArg {
    Latency,
    Energy,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Latency => Objective::Latency,
            ObjectiveArg::Energy => Objective::Energy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Static,
    Exhaustive,
    Lars,
    Scart,
}

/// Workload traces: explicit paths, else a manifest, else `[workloads] paths`.
#[derive(Args, Debug, Clone)]
pub struct TraceArgs {
    pub traces: Vec<PathBuf>,
    /// File listing trace paths, one per line, relative to the manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the synthetic corpus as trace files plus a manifest.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Overrides `[corpus] workloads`.
        #[arg(long)]
        workloads: Option<usize>,
        /// Also write train.txt and test.txt, holding out this fraction.
        #[arg(long)]
        holdout: Option<f64>,
    },
    /// Simulate one trace on one profile.
    Simulate {
        trace: PathBuf,
        /// Defaults to the base profile.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label every phase by exhaustive search and write the dataset CSV.
    Label {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a KNN model for the objective in effect.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated feature names; default all.
        #[arg(long, value_delimiter = ',', conflicts_with = "selection")]
        features: Vec<String>,
        /// A `select-features` report whose selected set to use.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Seeded k-fold cross-validation.
    Xval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, value_delimiter = ',')]
        features: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backward feature elimination by permutation importance.
    SelectFeatures {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// F-score versus feature count as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run a tuning policy over workloads.
    Policy {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Static profile; defaults to the base.
        #[arg(long)]
        profile: Option<String>,
        /// Model file, required for scart.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Mix manifest: run each mix's members together on a shared L2.
        #[arg(long)]
        mix: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-workload summary table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Savings of policy results against a baseline result file.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Configuration utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand, Debug)]
pub enum ConfigAction {
    /// Print the effective configuration in canonical form.
    Dump {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    let missing = |e: &std::io::Error| e.kind() == std::io::ErrorKind::NotFound;
    match err {
        Error::File { source, .. } if missing(source) => 3,
        Error::Io(e) if missing(e) => 3,
        Error::Parse { .. } | Error::InvalidParams(_) | Error::InvalidConfig(_) | Error::EmptyWorkload => 2,
        Error::Schema(_) | Error::Json(_) | Error::Csv(_) | Error::Dimension { .. } => 4,
        Error::CatalogMismatch { .. } => 5,
        Error::File { .. } | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
