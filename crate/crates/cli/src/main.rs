//! `bcslab` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bcslab_core::Error;
use clap::{Parser, Subcommand};

use config::Settings;

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or inputs: exit 2.
    Usage(String),
    /// Numerical failure or violated contract: exit 1.
    Failure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Extrapolation { .. } | Error::InvalidState(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bcslab", version, about = "Numerical laboratory for BCS theory")]
struct Cli {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical temperature of the translation-invariant model.
    Tc(Flags),
    /// Solves the gap equation at --T.
    Gap(Flags),
    /// Runs a randomized inequality suite.
    Verify {
        /// scalar, entropy, operator-identity, klein, block-trace or hs-chain.
        suite: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Evaluates the Matsubara kernel ζ(ep, eq) at --T.
    Kernel(Flags),
    /// Sweeps pairing-difference norms of the reference state over h.
    BdgScaling(Flags),
    /// Splits a binary pair field into order parameter and residual.
    Decompose(Flags),
    /// Evaluates the free-energy certificate of a state.
    Certify(Flags),
    /// Sweeps the residual norms of a state family over h.
    Apriori(Flags),
}

#[derive(Debug, clap::Args)]
struct Flags {
    #[command(flatten)]
    settings: Settings,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Tc(_) => "tc",
            Command::Gap(_) => "gap",
            Command::Verify { .. } => "verify",
            Command::Kernel(_) => "kernel",
            Command::BdgScaling(_) => "bdg-scaling",
            Command::Decompose(_) => "decompose",
            Command::Certify(_) => "certify",
            Command::Apriori(_) => "apriori",
        }
    }

    fn flags(&self) -> &Settings {
        match self {
            Command::Verify { flags, .. } => &flags.settings,
            Command::Tc(f)
            | Command::Gap(f)
            | Command::Kernel(f)
            | Command::BdgScaling(f)
            | Command::Decompose(f)
            | Command::Certify(f)
            | Command::Apriori(f) => &f.settings,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BCSLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("BCSLAB_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let name = cli.command.name();
    let file = match &cli.config {
        Some(p) => config::read_file(p)?,
        None => Settings::default(),
    };
    let settings = config::merge(file, cli.command.flags().clone(), name)?;
    settings.validate()?;
    let suite = match &cli.command {
        Command::Verify { suite, .. } => Some(suite.as_str()),
        _ => None,
    };
    commands::dispatch(name, suite, &settings)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
