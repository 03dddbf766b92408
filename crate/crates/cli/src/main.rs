//! `hijackmap`: ingest posts, train and compare classifiers, classify, and map incidents.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hijackmap::models::Family;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hijackmap", version, about = "Hijacking report classification and incident point maps")]
struct Cli {
    /// `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Append deduplicated records from INPUT to the STORE file.
    Ingest {
        input: PathBuf,
        store: PathBuf,
        /// Skip malformed lines instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Write a labeled synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 105)]
        relevant: usize,
        #[arg(long, default_value_t = 321)]
        irrelevant: usize,
        /// Defaults to <out>/corpus.jsonl.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train and compare one family (cnn, mlfnn, tinyformer) or all of them.
    Experiment {
        #[arg(default_value = "all")]
        family: String,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Separate test set; without it the dataset is split.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Add probability and predicted_label to each record of INPUT.
    Classify {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        vectorizer: Option<PathBuf>,
    },
    /// Build points.geojson and map.html from classified records.
    Map {
        classified: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    match cli.command {
        Command::Ingest { input, store, lenient } => commands::ingest(&input, &store, lenient),
        Command::Synth {
            relevant,
            irrelevant,
            output,
        } => commands::synth(&cfg, relevant, irrelevant, output.as_deref()),
        Command::Experiment {
            family,
            dataset,
            test,
            epochs,
        } => {
            if dataset.is_some() {
                cfg.dataset = dataset;
            }
            if test.is_some() {
                cfg.test_dataset = test;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let families = if family == "all" {
                Family::ALL.to_vec()
            } else {
                vec![family
                    .parse()
                    .map_err(|_| CliError::input(format!("unknown family `{family}` (cnn, mlfnn, tinyformer or all)")))?]
            };
            commands::experiment(&cfg, &families)
        }
        Command::Classify {
            input,
            output,
            checkpoint,
            vectorizer,
        } => commands::classify_file(&cfg, checkpoint.as_deref(), vectorizer.as_deref(), &input, &output),
        Command::Map { classified, gazetteer } => commands::map(&cfg, &classified, gazetteer.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
