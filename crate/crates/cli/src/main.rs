use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skipctl_cli::commands::{cmd_evaluate, cmd_sets, cmd_suite, cmd_train, Context};
use skipctl_cli::config::RunConfig;
use skipctl_cli::exit_code;

/// Safe intermittent control: safe sets, skip policies, evaluation.
#[derive(Parser)]
#[command(name = "skipctl", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `skipctl-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; required here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute, check and store X, X_I and X'.
    Sets,
    /// Train the skip agent against a stored bundle.
    Train,
    /// Compare skip policies on paired seeds.
    Evaluate,
    /// Every ACC scenario end to end, plus the consolidated report.
    Suite,
}

fn run(cli: Cli) -> skipctl::Result<i32> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Context::new(cfg, cli.out, cli.seed, cli.jobs)?;
    match cli.command {
        Command::Sets => cmd_sets(&ctx).map(|_| 0),
        Command::Train => cmd_train(&ctx).map(|_| 0),
        Command::Evaluate => cmd_evaluate(&ctx).map(|_| 0),
        Command::Suite => {
            let suite = cmd_suite(&ctx)?;
            let code = suite.failures().next().and_then(|o| o.report.as_ref().err()).map_or(0, |e| e.0);
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
