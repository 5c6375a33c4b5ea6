//! Command-line driver: generate, train, rank, evaluate.

mod config;
mod evaluate;
mod generate;
mod rank;
mod train;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use midrank::Error;

#[derive(Parser, Debug)]
#[command(
    name = "midrank",
    version,
    about = "Learning to rank from ordered subsequences"
)]
struct Cli {
    /// TOML file with one table per command; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic train and test datasets.
    Generate(generate::Args),
    /// Fit one ranker per subsequence length.
    Train(train::Args),
    /// Order sequences with a trained model.
    Rank(rank::Args),
    /// Score a model against ground-truth orders.
    Evaluate(evaluate::Args),
}

/// A message plus the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

impl Failure {
    pub fn usage(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::EmptyLambdaRange
            | Error::LambdaTooSmall(_)
            | Error::UnknownLambda(_)
            | Error::MissingPairRanker => Self::usage(e),
            _ => Self::data(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize>(value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::data)?;
    text.push('\n');
    Ok(text)
}

pub fn write_file(path: &std::path::Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::usage)?;
    }
    let file = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(args) => generate::run(args, &file),
        Command::Train(args) => train::run(args, &file),
        Command::Rank(args) => rank::run(args, &file),
        Command::Evaluate(args) => evaluate::run(args, &file),
    }
}
