//! Browser bindings. Each exported function returns a JSON string; the plain
//! Rust functions behind them are what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use quantband::indicators::{bands_from_forecast, shape_from_quantiles, BandSet, IndicatorConfig, ShapeEstimate};
use quantband::metrics::{cwc, pinaw, picp, CwcVariant, MetricConfig};
use quantband::strategy::generate_signal;
use quantband::synthetic::{generate, SyntheticKind, SyntheticSpec};
use quantband::{PredictionInterval, QuantileForecast, QuantileLevels};

#[derive(Debug, Serialize)]
pub struct IntervalScores {
    pub picp: f64,
    pub pinaw: f64,
    pub cwc: f64,
}

pub fn score_intervals(
    actuals: &[f64],
    lower: &[f64],
    upper: &[f64],
    beta: f64,
    eta: f64,
    squared_deviation: bool,
) -> Result<IntervalScores, String> {
    if lower.len() != actuals.len() || upper.len() != actuals.len() {
        return Err(format!("{} actuals, {} lower, {} upper", actuals.len(), lower.len(), upper.len()));
    }
    let cwc_variant = if squared_deviation { CwcVariant::SquaredDeviation } else { CwcVariant::SquaredNominal };
    let config = MetricConfig { beta, eta, cwc_variant, ..MetricConfig::default() };
    config.validate().map_err(|e| e.to_string())?;
    let intervals: Vec<PredictionInterval> =
        lower.iter().zip(upper).map(|(&lower, &upper)| PredictionInterval { lower, upper, beta }).collect();
    let picp = picp(actuals, &intervals).map_err(|e| e.to_string())?;
    let pinaw = pinaw(actuals, &intervals).map_err(|e| e.to_string())?;
    Ok(IntervalScores { picp, pinaw, cwc: cwc(picp, pinaw, &config) })
}

#[derive(Debug, Serialize)]
pub struct SignalReadout {
    pub signal: String,
    pub reason: &'static str,
    pub bands: BandSet,
    pub shape: ShapeEstimate,
}

/// `row` holds the 5%, 10%, 50%, 90% and 95% forecast quantiles.
pub fn read_signal(row: &[f64], price: f64, atr_pct: f64, rsi: f64) -> Result<SignalReadout, String> {
    let levels = QuantileLevels::default();
    let forecast = QuantileForecast::from_rows(levels.clone(), &[row.to_vec()]).map_err(|e| e.to_string())?;
    let bands = bands_from_forecast(&forecast, 0).map_err(|e| e.to_string())?;
    let shape = shape_from_quantiles(row, levels.as_slice()).map_err(|e| e.to_string())?;
    let signal = generate_signal(price, atr_pct, bands.lower, rsi, &IndicatorConfig::default());
    Ok(SignalReadout { signal: signal.kind.to_string(), reason: signal.reason, bands, shape })
}

/// Prices with the true 90% interval for each next bar; `lower[t]`/`upper[t]` bracket `prices[t + 1]`.
#[derive(Debug, Serialize)]
pub struct OracleSeries {
    pub prices: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn oracle_series(kind: &str, length: usize, seed: u64) -> Result<OracleSeries, String> {
    let kind: SyntheticKind = serde_json::from_value(serde_json::Value::String(kind.to_owned()))
        .map_err(|_| format!("unknown series kind `{kind}`"))?;
    let series = generate(&SyntheticSpec { kind, length, seed, ..SyntheticSpec::default() }).map_err(|e| e.to_string())?;
    let steps = series.len() - 1;
    Ok(OracleSeries {
        prices: series.prices().collect(),
        lower: (0..steps).map(|t| series.oracle_quantile(t, 0.05)).collect(),
        upper: (0..steps).map(|t| series.oracle_quantile(t, 0.95)).collect(),
    })
}

fn to_json<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = scoreIntervals)]
pub fn score_intervals_js(
    actuals: &[f64],
    lower: &[f64],
    upper: &[f64],
    beta: f64,
    eta: f64,
    squared_deviation: bool,
) -> Result<String, JsError> {
    to_json(score_intervals(actuals, lower, upper, beta, eta, squared_deviation))
}

#[wasm_bindgen(js_name = readSignal)]
pub fn read_signal_js(row: &[f64], price: f64, atr_pct: f64, rsi: f64) -> Result<String, JsError> {
    to_json(read_signal(row, price, atr_pct, rsi))
}

#[wasm_bindgen(js_name = oracleSeries)]
pub fn oracle_series_js(kind: &str, length: usize, seed: u64) -> Result<String, JsError> {
    to_json(oracle_series(kind, length, seed))
}
