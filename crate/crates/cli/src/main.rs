//! `rlvr-forge`: preprocess, roll out, select, synthesize, rate, combine and
//! summarize question datasets.

mod backends;
mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "rlvr-forge", version, about = "Build difficulty-verified RLVR question sets")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `mock` or a `[backends.<name>]` section of the config file.
    #[arg(long, global = true)]
    backend_profile: Option<String>,
    /// Directory for outputs and run manifests.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Continue from existing outputs instead of starting over.
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert multiple-choice items to free-form answers and drop yes/no items.
    Preprocess(PreprocessArgs),
    /// Compute Monte Carlo pass counts into the rollout cache.
    Rollout(RolloutArgs),
    /// Keep samples the target model solves reliably.
    Select(SelectArgs),
    /// Synthesize and verify harder variants of selected samples.
    Synth(SynthArgs),
    /// Rate item difficulty from pairwise judge comparisons.
    Rate(RateArgs),
    /// Merge seed and synthesized datasets.
    Combine(CombineArgs),
    /// Pass-count and reasoning-length statistics, with an SVG histogram.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to `<out-dir>/preprocessed.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Leave multiple-choice items untouched.
    #[arg(long)]
    pub keep_mcq: bool,
    /// Keep items whose answer is yes or no.
    #[arg(long)]
    pub keep_yes_no: bool,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Rollouts per sample (overrides `pipeline.n_rollouts`).
    #[arg(long)]
    pub n: Option<u32>,
    /// Defaults to `<out-dir>/rollouts.jsonl`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Overrides `pipeline.select.min_pass_for_selection`.
    #[arg(long)]
    pub min_pass: Option<u32>,
    /// Defaults to `<out-dir>/selected.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Seed dataset (already preprocessed).
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Defaults to `<out-dir>/synth.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Defaults to `<out-dir>/audit.jsonl`.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long)]
    pub items: PathBuf,
    /// Opponents per item (overrides `rating.k_opponents`).
    #[arg(long)]
    pub k: Option<usize>,
    /// Overrides `rating.bootstrap_rounds`.
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Defaults to `<out-dir>/ratings.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Augment,
    Replace,
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    #[arg(long)]
    pub seed_set: PathBuf,
    #[arg(long)]
    pub synth_set: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: Strategy,
    /// Defaults to `<out-dir>/combined.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// One or two datasets; two produce a paired histogram.
    #[arg(long = "dataset", required = true, num_args = 1)]
    pub datasets: Vec<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

/// Effective settings shared by every command.
pub struct Context {
    pub cfg: FileConfig,
    pub out_dir: PathBuf,
    pub resume: bool,
    pub config_path: Option<PathBuf>,
}

impl Context {
    fn new(cli: &Cli) -> CliResult<Self> {
        let mut cfg = match &cli.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(p) = &cli.backend_profile {
            cfg.backend_profile = p.clone();
        }
        Ok(Self { cfg, out_dir: cli.out_dir.clone(), resume: cli.resume, config_path: cli.config.clone() })
    }

    pub fn out(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out_dir.join(default))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut ctx = Context::new(&cli)?;
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| error::CliError::io(&ctx.out_dir, e))?;
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess(&mut ctx, a),
        Command::Rollout(a) => commands::rollout(&mut ctx, a),
        Command::Select(a) => commands::select(&mut ctx, a),
        Command::Synth(a) => commands::synth(&mut ctx, a),
        Command::Rate(a) => commands::rate(&mut ctx, a),
        Command::Combine(a) => commands::combine(&mut ctx, a),
        Command::Stats(a) => commands::stats(&mut ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; help and version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
