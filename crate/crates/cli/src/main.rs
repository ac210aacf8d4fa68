//! `fedpan`: train, shuffle-test, federate and analyse position-aware MLPs.
//!
//! Exit codes: 0 success, 2 config error, 3 data/format error, 4 numerical
//! failure.

mod commands;
mod error;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedpan::Execution;

use crate::commands::Context;
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

#[derive(Parser, Debug)]
#[command(
    name = "fedpan",
    version,
    about = "Federated learning with position-aware neurons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// `section.key=value` override, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Train one model on the pooled training set.
    TrainCentral,
    /// Shuffle-error sweep over (P_sf, A, T, mode) on a checkpoint.
    ShuffleTest,
    /// Federated run (or alpha sweep).
    FedRun,
    /// Divergence, matching, preference vectors and fusion for checkpoints.
    Analyze,
    /// Neuron matching against the first checkpoint.
    Match,
    /// Class preference vectors per neuron.
    Prefvec,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::TrainCentral => "train-central",
            Command::ShuffleTest => "shuffle-test",
            Command::FedRun => "fed-run",
            Command::Analyze => "analyze",
            Command::Match => "match",
            Command::Prefvec => "prefvec",
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let settings = settings::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    let exec = match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be >= 1".into())),
        Some(1) => Execution::Sequential,
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let out = OutDir::create(&cli.out)?;
    out.write_text("config.toml", &settings.echo(cli.command.name())?)?;
    let ctx = Context {
        settings,
        exec,
        out,
    };
    match cli.command {
        Command::TrainCentral => commands::cmd_train_central(&ctx),
        Command::ShuffleTest => commands::cmd_shuffle_test(&ctx),
        Command::FedRun => commands::cmd_fed_run(&ctx),
        Command::Analyze => commands::cmd_analyze(&ctx),
        Command::Match => commands::cmd_match(&ctx),
        Command::Prefvec => commands::cmd_prefvec(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedpan {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
