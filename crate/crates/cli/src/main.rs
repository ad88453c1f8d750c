//! `fracelast run <config.json>`: configuration-driven experiments.

mod config;
mod output;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Mode};
use run::Failure;

#[derive(Parser)]
#[command(name = "fracelast", version, about = "Fractional visco-elasticity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides the config's mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Seed of the random positivity probes.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Print the fully resolved config as JSON and exit.
        #[arg(long)]
        print_config: bool,
    },
}

fn run(
    path: PathBuf,
    mode: Option<Mode>,
    seed: Option<u64>,
    threads: Option<usize>,
    print_config: bool,
) -> Result<bool, Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Config(anyhow::anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.into()))?;
    }
    let mut config = ExperimentConfig::load(&path).map_err(Failure::Config)?;
    if let Some(mode) = mode {
        config.mode = mode;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let resolved = run::resolve(config)?;
    if print_config {
        let text = serde_json::to_string_pretty(&resolved.resolved_config())
            .map_err(|e| Failure::Config(e.into()))?;
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        let _ = writeln!(std::io::stdout(), "{text}");
        return Ok(true);
    }
    let outcome = run::execute(&resolved)?;
    for check in &outcome.checks {
        println!("{}", check.summary_line());
    }
    if let Some(failed) = outcome.checks.iter().find(|c| !c.pass) {
        eprintln!("numerical failure: check {} failed", failed.name);
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        mode,
        seed,
        threads,
        print_config,
    } = Cli::parse().command;
    match run(config, mode, seed, threads, print_config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
