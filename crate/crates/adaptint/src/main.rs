use std::path::PathBuf;
use std::process::ExitCode;

use adaptint::{CliError, LoadedConfig, Run, Subcommand};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Simulate,
    Fit,
    Evaluate,
    Regret,
    Dr,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Subcommand::Simulate,
            Command::Fit => Subcommand::Fit,
            Command::Evaluate => Subcommand::Evaluate,
            Command::Regret => Subcommand::Regret,
            Command::Dr => Subcommand::Dr,
        }
    }
}

/// Dynamic treatment regimes and contextual bandits for adaptive interventions.
#[derive(Debug, Parser)]
#[command(name = "adaptint", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (TOML).
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Outputs do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Input dataset CSV; overrides `[data] path`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Regime JSON for `evaluate`; overrides `[data] regime`.
    #[arg(long)]
    regime: Option<PathBuf>,
}

fn execute(args: Args) -> Result<Vec<PathBuf>, CliError> {
    let config = LoadedConfig::load(&args.config)?;
    let run = Run::new(config, args.seed, args.out, args.data, args.regime)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().expect("thread pool");
    pool.install(|| run.execute(args.command.into()))
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
