use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polo::{run_experiment, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "polo", version, about = "Plan-online/learn-offline experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config
    Run {
        config: PathBuf,
        /// Replace the config's seed list with this single seed
        #[arg(long)]
        seed_override: Option<u64>,
        /// Output directory (overrides the config's `output`)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel jobs
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let Cmd::Run {
        config,
        seed_override,
        out,
        jobs,
    } = cli.command;
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(seed) = seed_override {
        cfg.seeds = vec![seed];
    }
    let out = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("polo-out"));
    let outcome = run_experiment(&cfg, &config, &out, jobs)?;
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    eprintln!("wrote {}", outcome.output.display());
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: a checked property failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
