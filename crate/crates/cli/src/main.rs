mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use trustwalk_core::Error;

use crate::commands::{BuildArgs, CentralityArgs, EvaluateArgs, GenerateArgs, PredictArgs, StatsArgs};
use crate::settings::Flags;

/// Trust-network rating prediction with biased random walks.
#[derive(Debug, Parser)]
#[command(name = "trustwalk", version)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the trust network and export its edges.
    Build(BuildArgs),
    /// Predict one rating, falling back to association rules.
    Predict(PredictArgs),
    /// Leave-one-out evaluation over a user split.
    Evaluate(EvaluateArgs),
    /// Per-user impact factor and classic H-index.
    Centrality(CentralityArgs),
    /// Dataset summary.
    Stats(StatsArgs),
    /// Write a seeded synthetic dataset.
    Generate(GenerateArgs),
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CANNOT_COVER: u8 = 2;
pub const EXIT_UNKNOWN: u8 = 3;
pub const EXIT_DATA: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::UnknownUser(_) | Error::UnknownItem(_) => EXIT_UNKNOWN,
        Error::Io { .. } | Error::Parse { .. } | Error::Validation { .. } | Error::Domain(_) => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let run = settings::resolve(&cli.flags).and_then(|config| {
        if let Some(n) = config.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        }
        match cli.command {
            Command::Build(args) => commands::build(&config, &args),
            Command::Predict(args) => commands::predict(&config, &args),
            Command::Evaluate(args) => commands::evaluate(&config, &args),
            Command::Centrality(args) => commands::centrality(&config, &args),
            Command::Stats(args) => commands::stats(&config, &args),
            Command::Generate(args) => commands::generate(&config, &args),
        }
    });
    match run {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
