use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nilmix_cli::{execute, exit_code, Command, Overrides};

/// Nilmanifold automorphism experiments.
#[derive(Parser, Debug)]
#[command(name = "nilmix", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "NILMIX_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "NILMIX_WORKERS")]
    workers: Option<usize>,
    /// Output directory; defaults to the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides { seed: cli.seed, workers: cli.workers, out: cli.out };
    match execute(cli.command, &cli.config, &overrides) {
        Ok(outcome) => {
            print!("{}", outcome.message);
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
