//! Subcommand orchestration: every stage reads the previous stage's artifacts
//! from the output directory and writes its own there atomically.

mod commands;
mod config;
mod io;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{
    cmd_backtest, cmd_compare, cmd_eval, cmd_ingest, cmd_synth, cmd_train, ArtifactNames, BacktestOutcome,
    CompareOutcome, EvalOutcome, IngestOutcome, SynthOutcome, TrainRun,
};
pub use config::{DataConfig, DataSource, ModelConfig, RunConfig, Split};
pub use io::write_atomic;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact {0}; run the earlier stage first")]
    MissingArtifact(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    MarketData(#[from] crate::market_data::MarketDataError),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Indicator(#[from] crate::indicators::IndicatorError),
    #[error(transparent)]
    Backtest(#[from] crate::backtest::BacktestError),
    #[error(transparent)]
    Synthetic(#[from] crate::synthetic::SyntheticError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
