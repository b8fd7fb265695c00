use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use quantband::pipeline::{
    cmd_backtest, cmd_compare, cmd_eval, cmd_ingest, cmd_synth, cmd_train, Result, RunConfig,
};

#[derive(Debug, Parser)]
#[command(name = "quantband", version, about = "Quantile forecasting, interval metrics and indicator backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random source; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Debug-level logging on stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Parse ticks, resample bars and write the windowed datasets.
    Ingest,
    /// Train the configured model and write a checkpoint.
    Train,
    /// Score the checkpoint on the test split.
    Eval,
    /// Run the indicator strategy over the test split.
    Backtest,
    /// Train and score every model kind side by side.
    Compare,
    /// Write a synthetic tick file and its oracle quantiles.
    Synth,
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| quantband::pipeline::PipelineError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
        cfg.validate()?;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir());
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg, &out).map(drop),
        Command::Train => cmd_train(&cfg, &out).map(drop),
        Command::Eval => cmd_eval(&cfg, &out).map(drop),
        Command::Backtest => cmd_backtest(&cfg, &out).map(drop),
        Command::Compare => cmd_compare(&cfg, &out).map(drop),
        Command::Synth => cmd_synth(&cfg, &out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
