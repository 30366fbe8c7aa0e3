//! Command-line front end for the intersection crossing stack: `train`,
//! `evaluate`, `replay`, and `inspect-config`, over a flat TOML
//! configuration with flag overrides.
//!
//! Exit codes: 0 success, 1 replay divergence, 2 usage error,
//! 3 configuration error, 4 checkpoint/schema version mismatch, 5 I/O error.

mod commands;
pub mod config;
pub mod error;

use clap::{Args, Parser, Subcommand};
use config::{resolve, Overrides};
use error::EXIT_USAGE;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "crossway",
    version,
    about = "Cooperative intersection crossing: training, evaluation, and trace replay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy variant and write checkpoint, log, and manifest.
    Train(RunArgs),
    /// Evaluate a checkpoint greedily over seeded episodes (default 100).
    Evaluate(EvalArgs),
    /// Re-simulate a recorded trace and verify it matches bit for bit.
    Replay(ReplayArgs),
    /// Print the fully resolved configuration and exit.
    InspectConfig(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Policy variant: maddpg | attention_maddpg | ma_ga_ddpg.
    #[arg(long)]
    variant: Option<String>,
    /// Scene layout: single_lane | two_lane | three_lane.
    #[arg(long)]
    scenario: Option<String>,
    /// Root seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of episodes to run.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory (default runs/<variant>_<scenario>_seed<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Episode rollout threads (1 = fully deterministic).
    #[arg(long)]
    workers: Option<usize>,
    /// Safety inspection: auto | on | off.
    #[arg(long)]
    inspector: Option<String>,
    /// Record one JSONL trace per episode.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Checkpoint produced by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace file produced by a run with tracing enabled.
    #[arg(long)]
    trace: PathBuf,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            variant: self.variant.clone(),
            scenario: self.scenario.clone(),
            seed: self.seed,
            episodes: self.episodes,
            workers: self.workers,
            inspector: self.inspector.clone(),
            out: self.out.clone(),
            record_traces: if self.trace { Some(true) } else { None },
        }
    }
}

const TRAIN_DEFAULT_EPISODES: usize = 500;
const EVAL_DEFAULT_EPISODES: usize = 100;

/// Parses `argv` and runs the selected command, returning the process exit
/// code. The first element of `argv` is the program name.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful terminations.
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Train(args) => resolve(
            args.config.as_deref(),
            &args.overrides(),
            TRAIN_DEFAULT_EPISODES,
        )
        .and_then(|cfg| commands::cmd_train(&cfg)),
        Command::Evaluate(args) => resolve(
            args.run.config.as_deref(),
            &args.run.overrides(),
            EVAL_DEFAULT_EPISODES,
        )
        .and_then(|cfg| commands::cmd_evaluate(&cfg, &args.checkpoint)),
        Command::Replay(args) => commands::cmd_replay(&args.trace),
        Command::InspectConfig(args) => resolve(
            args.config.as_deref(),
            &args.overrides(),
            TRAIN_DEFAULT_EPISODES,
        )
        .and_then(|cfg| commands::cmd_inspect_config(&cfg)),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
