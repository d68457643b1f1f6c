use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crowdfuse_cli::aggregate::{self, AggregateArgs};
use crowdfuse_cli::bounds_cmd::{self, BoundsArgs};
use crowdfuse_cli::experiment::{self, ExperimentArgs};
use crowdfuse_cli::output::write_json;
use crowdfuse_cli::synth_cmd::{self, SynthArgs};
use crowdfuse_cli::{exit, init_threads};

/// Fuse noisy crowdsourced labels with variational Bayes.
#[derive(Parser)]
#[command(name = "crowdfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one method and write a result JSON.
    Aggregate(AggregateArgs),
    /// Sweep constraint protocols and budgets, writing one CSV row per fit.
    Experiment(ExperimentArgs),
    /// Sample a synthetic crowd into responses.csv, truth.csv and spec.json.
    Synth(SynthArgs),
    /// Compare the theoretical error bounds with a run on a synthetic crowd.
    Bounds(BoundsArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Aggregate(a) => write_json(&aggregate::run(&a)?, a.out.as_deref()),
        Command::Experiment(a) => experiment::write_csv(&experiment::run(&a)?, a.out.as_deref()),
        Command::Synth(a) => synth_cmd::run(&a),
        Command::Bounds(a) => write_json(&bounds_cmd::run(&a)?, a.out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e) as u8)
        }
    }
}
