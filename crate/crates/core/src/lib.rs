//! Quantile forecasting for futures tick data.
//!
//! The crate covers the whole desk-scale pipeline: tick ingestion and bar
//! resampling ([`market_data`]), quantile-output forecasting models trained by
//! pinball-loss minimization ([`models`]), prediction-interval quality metrics
//! ([`metrics`]), technical indicators and quantile-derived bands
//! ([`indicators`]), the rule-based signal generator ([`strategy`]), the
//! backtester ([`backtest`]), synthetic series with known conditional
//! quantiles ([`synthetic`]) and the command orchestration used by the
//! `quantband` binary ([`pipeline`]).

pub mod backtest;
pub mod indicators;
pub mod market_data;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod strategy;
pub mod synthetic;

pub use market_data::{Bar, NormalizationParams, TickRecord, Timestamp, WindowedDataset};
pub use models::{
    pinball_loss, PredictionInterval, QuantileForecast, QuantileLevels, QuantileModel,
};
