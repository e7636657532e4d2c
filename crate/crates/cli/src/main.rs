//! `blinklight` — blink-probability regression from pose time series and
//! highlight detection, stage by stage.

mod config;
mod log;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blinklight_core::with_thread_pool;
use config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "blinklight",
    version,
    about = "Estimate audience blink probability from skater pose time series and detect highlights",
    long_about = "Pipeline stages write their artifacts plus provenance manifests under the \
                  output directory; every stage is re-runnable and deterministic for a given \
                  seed. Set BLINKLIGHT_LOG=debug|info|warn|error for verbosity."
)]
struct Cli {
    /// Configuration file (TOML); omitted keys fall back to defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config key.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap (0 = all cores); overrides the config key.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory; overrides the config key.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print the execution plan without running anything.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted pose→blink coupling.
    Synth,
    /// Parse keypoint files into normalized joint matrices.
    Ingest,
    /// Detect blinks in pupil traces and build per-frame rate series.
    Blinks,
    /// Slice joints + rates into the windowed training dataset.
    Dataset {
        /// Also export the dataset as CSV for inspection.
        #[arg(long)]
        csv: bool,
    },
    /// Leave-one-out training: per-fold checkpoints and dense predictions.
    Train,
    /// Dense prediction for one clip from a checkpoint.
    Predict {
        /// Clip id to predict.
        #[arg(long)]
        clip: String,
        /// Checkpoint path; defaults to the clip's leave-one-out fold.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Surrogate-corrected correlations and event-aligned curves.
    Stats,
    /// Detect sustained low-probability segments and export bounds.
    Highlights,
    /// Full pipeline on the synthetic corpus plus the acceptance report.
    Reproduce,
}

fn command_stage(cmd: &Command) -> &'static str {
    match cmd {
        Command::Synth => "synth",
        Command::Ingest => "ingest",
        Command::Blinks => "blinks",
        Command::Dataset { .. } => "dataset",
        Command::Train => "train",
        Command::Predict { .. } => "predict",
        Command::Stats => "stats",
        Command::Highlights => "highlights",
        Command::Reproduce => "reproduce",
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => match cli.command {
            Command::Reproduce => PipelineConfig::reproduce_profile(),
            _ => PipelineConfig::default(),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    cfg.validate()?;

    if cli.dry_run {
        for line in stages::stage_plan(&cfg, command_stage(&cli.command)) {
            println!("plan: {line}");
        }
        return Ok(true);
    }

    let cfg = &cfg;
    with_thread_pool(cfg.threads, || -> anyhow::Result<bool> {
        match &cli.command {
            Command::Synth => stages::cmd_synth(cfg).map(|()| true),
            Command::Ingest => stages::cmd_ingest(cfg).map(|()| true),
            Command::Blinks => stages::cmd_blinks(cfg).map(|()| true),
            Command::Dataset { csv } => stages::cmd_dataset(cfg, *csv).map(|()| true),
            Command::Train => stages::cmd_train(cfg).map(|()| true),
            Command::Predict { clip, checkpoint } => {
                stages::cmd_predict(cfg, clip, checkpoint.as_deref()).map(|()| true)
            }
            Command::Stats => stages::cmd_stats(cfg).map(|()| true),
            Command::Highlights => stages::cmd_highlights(cfg).map(|()| true),
            Command::Reproduce => stages::cmd_reproduce(cfg),
        }
    })
}

fn main() -> ExitCode {
    log::init_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error("one or more acceptance criteria failed (see report)");
            ExitCode::FAILURE
        }
        Err(e) => {
            log::error(&format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
