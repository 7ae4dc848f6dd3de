//! `malelm`: convert executables to images, train and evaluate ELM
//! classifiers and committees, and time the hidden-layer kernels.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod artifact;
mod commands;
mod error;
mod output;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{bench, convert, eval, inspect, train};
use error::{usage, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "malelm", version, about = "Malware image classification with extreme learning machines")]
struct Cli {
    /// Worker threads for decoding and ensemble training.
    #[arg(long, global = true, value_name = "K")]
    jobs: Option<usize>,
    /// Refuse randomized work without an explicit seed.
    #[arg(long, global = true)]
    strict_repro: bool,
    /// More log output (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render executables as grayscale images.
    Convert(convert::ConvertArgs),
    /// Train a model or committee on an image corpus.
    Train(train::TrainArgs),
    /// Score a model or committee on a corpus and write reports.
    Eval(eval::EvalArgs),
    /// Time training over a grid of alpha and hidden-unit counts.
    Bench(bench::BenchArgs),
    /// Print the header of a model or committee file.
    Inspect(inspect::InspectArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn init_pool(jobs: Option<usize>) -> CliResult {
    let Some(k) = jobs else {
        return Ok(());
    };
    if k == 0 {
        return Err(usage("`jobs` must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| CliError::Runtime(e.into()))
}

fn run(cli: &Cli) -> CliResult {
    init_pool(cli.jobs)?;
    match &cli.command {
        Command::Convert(a) => convert::run(a),
        Command::Train(a) => train::run(a, cli.strict_repro),
        Command::Eval(a) => eval::run(a),
        Command::Bench(a) => bench::run(a, cli.strict_repro),
        Command::Inspect(a) => inspect::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
