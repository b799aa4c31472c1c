//! `bdris` command-line pipeline: `gen-env` → `simulate` → `estimate` → `optimize`,
//! plus `verify`. Stages communicate only through files in the output directory.

mod commands;
mod config;
mod error;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "bdris", version, about = "BD-RIS channel simulation, estimation and optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic radio environment
    GenEnv(Common),
    /// Build the load circuit and write training/held-out datasets
    Simulate(Common),
    /// Fit the cascade parameters and write predictions for held-out configurations
    Estimate(Common),
    /// Maximize RSSI on the fitted model and cross-check against the ground truth
    Optimize(Common),
    /// Run the consistency checks and print a pass/fail table
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; the built-in default scenario when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides scenario.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides io.out
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            cfg.scenario.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.io.out = out.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenEnv(c) => commands::gen_env(&c.load()?),
        Command::Simulate(c) => commands::simulate(&c.load()?),
        Command::Estimate(c) => commands::estimate(&c.load()?),
        Command::Optimize(c) => commands::optimize(&c.load()?),
        Command::Verify(c) => verify::run(&c.load()?).map(|_| ()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdris: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
