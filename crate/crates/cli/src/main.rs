use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use selftrain_core::augment::AugmenterKind;

mod commands;
mod config;
mod error;
mod run_dir;

use config::{ExperimentConfig, Overrides};
use error::{CliResult, EXIT_USAGE};

/// Self-training experiments for offensive language detection.
#[derive(Parser, Debug)]
#[command(name = "selftrain", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any config field, e.g. `--set train.epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Comma-separated run seeds.
    #[arg(long, alias = "seed", global = true, value_delimiter = ',')]
    seeds: Vec<u64>,

    /// Run directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// `builtin` or the URL of a classifier service.
    #[arg(long, global = true)]
    backend: Option<String>,

    /// Comma-separated augmentation methods: none, word-swap, synonym, backtranslation.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_kind)]
    augment: Vec<AugmenterKind>,

    /// Confidence threshold for weak labels.
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Number of generations, the teacher included.
    #[arg(long, global = true)]
    generations: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read and normalize the configured data files into the run directory.
    Ingest,
    /// Default fine-tuning (the teacher alone) for every seed.
    Train,
    /// Default fine-tuning plus self-training with each augmentation method.
    Selftrain,
    /// Write augmented copies of a split for inspection.
    Augment {
        #[arg(long, default_value = "unlabelled")]
        split: String,
    },
    /// Label shift and vocabulary growth of each augmentation method.
    Analyze {
        /// Model to audit; defaults to the first seed's baseline model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Print the results table of a finished run.
    Report,
}

fn parse_kind(s: &str) -> Result<AugmenterKind, String> {
    s.parse::<AugmenterKind>().map_err(|e| e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    let overrides = Overrides {
        set: g.set,
        seeds: g.seeds,
        output: g.output,
        backend: g.backend,
        augment: g.augment,
        threshold: g.threshold,
        generations: g.generations,
    };
    let cfg = ExperimentConfig::load(g.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Selftrain => commands::selftrain(&cfg),
        Command::Augment { split } => commands::augment(&cfg, &split),
        Command::Analyze { model, split } => commands::analyze(&cfg, model, &split),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
