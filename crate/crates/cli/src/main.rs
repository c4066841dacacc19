//! `sdi`: operational front end for the supplement interaction engine.

mod commands;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdi_core::classifier::convert::Preset;
use sdi_core::classifier::Split;
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(name = "sdi", version, about = "Supplement interaction evidence engine")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "SDI_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct CatalogArgs {
    /// Agent catalog (JSON lines); overrides `[catalog].agents`.
    #[arg(long)]
    agents: Option<PathBuf>,
    /// Cluster map (member TAB canonical); overrides `[catalog].clusters`.
    #[arg(long)]
    clusters: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct ScorerArgs {
    /// Baseline model file; overrides the configured scorer backend.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus records to a candidate-pair dump.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        catalog: CatalogArgs,
    },
    /// Train the baseline scorer on the train and dev splits.
    Train {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        max_epochs: usize,
        #[arg(long, default_value_t = 20)]
        hash_bits: u32,
    },
    /// Detection metrics report.
    Eval {
        #[arg(long)]
        instances: PathBuf,
        /// Split to evaluate.
        #[arg(long, default_value = "test")]
        split: Split,
        /// Decision threshold; defaults to the configured tau.
        #[arg(long)]
        threshold: Option<f64>,
        /// Training-configuration column as NAME=MODEL; repeat for a
        /// per-source ablation table.
        #[arg(long = "ablation", value_name = "NAME=MODEL")]
        ablation: Vec<String>,
        #[command(flatten)]
        scorer: ScorerArgs,
    },
    /// Score candidates and write admitted evidence.
    Classify {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        catalog: CatalogArgs,
        #[command(flatten)]
        scorer: ScorerArgs,
    },
    /// Assemble admitted evidence into a snapshot directory.
    Build {
        #[arg(long)]
        evidence: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        catalog: CatalogArgs,
    },
    /// Serve a snapshot over HTTP.
    Serve {
        /// Snapshot directory; falls back to SDI_SNAPSHOT, then the config.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Listen address; falls back to SDI_BIND, then the config.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Copy a snapshot after verifying its manifest.
    Export {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert DDI-schema XML into labeled instances.
    Convert {
        /// ddi2013 or nlm-dailymed.
        #[arg(long)]
        preset: Preset,
        /// Directory with Train* and Test* subtrees.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2013)]
        seed: u64,
        #[arg(long)]
        dev_size: Option<usize>,
    },
    /// Write a seeded synthetic corpus in DDI XML.
    Synth {
        /// ddi2013 or nlm-dailymed.
        #[arg(long)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2013)]
        seed: u64,
    },
    /// Answer the scorer wire protocol with a baseline model.
    ServeScorer {
        #[arg(long)]
        model: PathBuf,
        /// Serve HTTP on this address instead of stdin/stdout.
        #[arg(long)]
        http: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
