use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbsde_cli::commands::{cmd_eval, cmd_landscape, cmd_sweep, cmd_train, cmd_verify};
use fbsde_cli::config::ExperimentConfig;
use fbsde_cli::error::CliError;

/// Numerical experiments on forward-backward SDE self-consistency losses
/// under Euler-Maruyama and stochastic Heun integration.
#[derive(Parser)]
#[command(name = "fbsde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config's output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 0 = auto.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant and bias-verification suite.
    Verify,
    /// Train the configured model against the configured loss.
    Train,
    /// Skip-length sweep: train per (loss kind, k, N, seed).
    Sweep,
    /// Loss-landscape sweep over the exact-solution scaling parameter.
    Landscape,
    /// Evaluate a model against the reference along forward trajectories.
    Eval,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out_dir)?;

    match cli.command {
        Command::Verify => cmd_verify(&cfg, &out_dir).map(|_| ()),
        Command::Train => cmd_train(&cfg, &out_dir),
        Command::Sweep => cmd_sweep(&cfg, &out_dir),
        Command::Landscape => cmd_landscape(&cfg, &out_dir),
        Command::Eval => cmd_eval(&cfg, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
