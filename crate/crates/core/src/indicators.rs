//! Technical indicators and distribution-shape estimates from quantile forecasts.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::market_data::Bar;
use crate::models::QuantileForecast;

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("insufficient data: need {needed} values, got {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("quantile level {0} is not among the forecast levels")]
    MissingLevel(f64),
    #[error("forecast row {0} is not monotone; repair it first")]
    NotMonotone(usize),
    #[error("invalid indicator config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = IndicatorError> = std::result::Result<T, E>;

/// Series the RSI is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RsiSource {
    #[default]
    Close,
    PredictedMedian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorConfig {
    pub rsi_period: usize,
    pub atr_period: usize,
    pub atr_low: f64,
    pub atr_high: f64,
    pub threshold: f64,
    pub rsi_source: RsiSource,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        Self {
            rsi_period: 14,
            atr_period: 14,
            atr_low: 0.01,
            atr_high: 0.03,
            threshold: 1.0,
            rsi_source: RsiSource::Close,
        }
    }
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rsi_period == 0 || self.atr_period == 0 {
            return Err(IndicatorError::InvalidConfig("periods must be at least 1".into()));
        }
        if !(self.atr_low > 0.0 && self.atr_low < self.atr_high) {
            return Err(IndicatorError::InvalidConfig(format!(
                "need 0 < atr_low < atr_high, got {} and {}",
                self.atr_low, self.atr_high
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(IndicatorError::InvalidConfig(format!("threshold {} must be positive", self.threshold)));
        }
        Ok(())
    }
}

fn need(len: usize, period: usize) -> Result<()> {
    if len < period + 1 {
        return Err(IndicatorError::InsufficientData { needed: period + 1, available: len });
    }
    Ok(())
}

/// Wilder smoothing seeded by the simple mean of the first `period` values.
fn wilder(values: &[f64], period: usize) -> Vec<f64> {
    let p = period as f64;
    let mut avg = values[..period].iter().sum::<f64>() / p;
    let mut out = Vec::with_capacity(values.len() - period + 1);
    out.push(avg);
    for &v in &values[period..] {
        avg = (avg * (p - 1.0) + v) / p;
        out.push(avg);
    }
    out
}

/// Relative strength index. Element `k` belongs to close index `period + k`.
pub fn rsi(closes: &[f64], period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(IndicatorError::InvalidConfig("rsi period must be at least 1".into()));
    }
    need(closes.len(), period)?;
    let (gains, losses): (Vec<f64>, Vec<f64>) =
        closes.windows(2).map(|w| (w[1] - w[0]).max(0.0)).zip(closes.windows(2).map(|w| (w[0] - w[1]).max(0.0))).unzip();
    let avg_gain = wilder(&gains, period);
    let avg_loss = wilder(&losses, period);
    Ok(avg_gain
        .iter()
        .zip(&avg_loss)
        .map(|(&g, &l)| if l == 0.0 { 100.0 } else { 100.0 - 100.0 / (1.0 + g / l) })
        .collect())
}

pub fn true_range(high: f64, low: f64, prev_close: f64) -> f64 {
    (high - low).max((high - prev_close).abs()).max((low - prev_close).abs())
}

/// Average true range as a fraction of the close. Element `k` belongs to bar `period + k`.
pub fn atr_percent(bars: &[Bar], period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(IndicatorError::InvalidConfig("atr period must be at least 1".into()));
    }
    need(bars.len(), period)?;
    let ranges: Vec<f64> = bars.windows(2).map(|w| true_range(w[1].high, w[1].low, w[0].close)).collect();
    Ok(wilder(&ranges, period)
        .into_iter()
        .zip(&bars[period..])
        .map(|(atr, bar)| atr / bar.close)
        .collect())
}

/// Bands read from the five default forecast levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandSet {
    pub upper: f64,
    pub upper_inner: f64,
    pub middle: f64,
    pub lower_inner: f64,
    pub lower: f64,
}

pub const BAND_LEVELS: [f64; 5] = [0.05, 0.10, 0.50, 0.90, 0.95];

pub fn bands_from_forecast(forecast: &QuantileForecast, sample: usize) -> Result<BandSet> {
    let cols = BAND_LEVELS
        .iter()
        .map(|&l| forecast.levels.index_of(l).ok_or(IndicatorError::MissingLevel(l)))
        .collect::<Result<Vec<_>>>()?;
    let row = forecast.row(sample);
    if row.windows(2).any(|w| w[0] > w[1]) {
        return Err(IndicatorError::NotMonotone(sample));
    }
    Ok(BandSet {
        lower: row[cols[0]],
        lower_inner: row[cols[1]],
        middle: row[cols[2]],
        upper_inner: row[cols[3]],
        upper: row[cols[4]],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeEstimate {
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Below this the fitted scale is treated as zero.
pub const MIN_FITTED_SCALE: f64 = 1e-12;

/// Least-squares fit of the Cornish-Fisher expansion
/// `q(p) = m + s * (z + (z^2 - 1) * skew / 6 + (z^3 - 3z) * kurt / 24)`
/// to quantile values `row` at probabilities `levels`.
pub fn shape_from_quantiles(row: &[f64], levels: &[f64]) -> Result<ShapeEstimate> {
    if row.len() != levels.len() {
        return Err(IndicatorError::InvalidConfig(format!(
            "{} quantile values for {} levels",
            row.len(),
            levels.len()
        )));
    }
    if row.len() < 4 {
        return Err(IndicatorError::InsufficientData { needed: 4, available: row.len() });
    }
    if row.windows(2).any(|w| w[0] > w[1]) {
        return Err(IndicatorError::NotMonotone(0));
    }
    let normal = Normal::standard();
    let design = DMatrix::from_fn(row.len(), 4, |i, j| {
        let z = normal.inverse_cdf(levels[i]);
        match j {
            0 => 1.0,
            1 => z,
            2 => z * z - 1.0,
            _ => z * z * z - 3.0 * z,
        }
    });
    let coef = design
        .svd(true, true)
        .solve(&DVector::from_column_slice(row), 1e-14)
        .map_err(|e| IndicatorError::InvalidConfig(e.to_string()))?;
    let (mean, scale) = (coef[0], coef[1]);
    if scale < MIN_FITTED_SCALE {
        return Ok(ShapeEstimate { mean, std_dev: 0.0, skewness: 0.0, excess_kurtosis: 0.0 });
    }
    Ok(ShapeEstimate {
        mean,
        std_dev: scale,
        skewness: 6.0 * coef[2] / scale,
        excess_kurtosis: 24.0 * coef[3] / scale,
    })
}

/// Per-bar indicator values; `None` during each indicator's warm-up.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndicatorSeries {
    pub rsi: Vec<Option<f64>>,
    pub atr_pct: Vec<Option<f64>>,
}

/// RSI and ATR% aligned to `bars`. `median` replaces closes as the RSI input when
/// the config selects the predicted median.
pub fn indicator_series(bars: &[Bar], median: Option<&[f64]>, config: &IndicatorConfig) -> Result<IndicatorSeries> {
    config.validate()?;
    let closes: Vec<f64> = match (config.rsi_source, median) {
        (RsiSource::PredictedMedian, Some(m)) => m.to_vec(),
        (RsiSource::PredictedMedian, None) => {
            return Err(IndicatorError::InvalidConfig("predicted-median RSI needs a forecast median".into()))
        }
        (RsiSource::Close, _) => bars.iter().map(|b| b.close).collect(),
    };
    let pad = |values: Result<Vec<f64>>, warmup: usize| -> Vec<Option<f64>> {
        match values {
            Ok(v) => std::iter::repeat_n(None, warmup).chain(v.into_iter().map(Some)).collect(),
            Err(_) => vec![None; bars.len()],
        }
    };
    Ok(IndicatorSeries {
        rsi: pad(rsi(&closes, config.rsi_period), config.rsi_period),
        atr_pct: pad(atr_percent(bars, config.atr_period), config.atr_period),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QuantileLevels;
    use crate::Timestamp;

    fn bar(high: f64, low: f64, close: f64) -> Bar {
        Bar { open_time: Timestamp(0), open: close, high, low, close, volume_delta: 0, spread: 0.0 }
    }

    #[test]
    fn rsi_extremes() {
        let up: Vec<f64> = (0..30).map(f64::from).collect();
        assert!(rsi(&up, 14).unwrap().iter().all(|&v| v == 100.0));
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert!(rsi(&down, 14).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(rsi(&up[..14], 14), Err(IndicatorError::InsufficientData { needed: 15, .. })));
    }

    #[test]
    fn atr_spot_values() {
        let flat = vec![bar(100.0, 100.0, 100.0); 20];
        assert!(atr_percent(&flat, 14).unwrap().iter().all(|&v| v == 0.0));
        let ranged = vec![bar(100.5, 99.5, 100.0); 200];
        let atr = atr_percent(&ranged, 14).unwrap();
        assert!((atr.last().unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(true_range(103.0, 102.0, 100.0), 3.0);
    }

    #[test]
    fn bands_map_levels() {
        let f = QuantileForecast::new(QuantileLevels::default(), vec![9.0, 9.5, 10.0, 10.5, 11.0, 5.0, 4.0, 6.0, 7.0, 8.0])
            .unwrap();
        let b = bands_from_forecast(&f, 0).unwrap();
        assert_eq!((b.lower, b.lower_inner, b.middle, b.upper_inner, b.upper), (9.0, 9.5, 10.0, 10.5, 11.0));
        assert!(matches!(bands_from_forecast(&f, 1), Err(IndicatorError::NotMonotone(1))));
        let three = QuantileForecast::new(QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap(), vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(bands_from_forecast(&three, 0), Err(IndicatorError::MissingLevel(l)) if l == 0.05));
    }

    #[test]
    fn flat_row_is_degenerate_shape() {
        let s = shape_from_quantiles(&[4.0; 5], &BAND_LEVELS).unwrap();
        assert_eq!((s.std_dev, s.skewness, s.excess_kurtosis), (0.0, 0.0, 0.0));
        assert!((s.mean - 4.0).abs() < 1e-12);
    }

    #[test]
    fn indicator_series_is_aligned() {
        let bars: Vec<Bar> = (0..20).map(|i| bar(101.0 + i as f64, 99.0 + i as f64, 100.0 + i as f64)).collect();
        let s = indicator_series(&bars, None, &IndicatorConfig::default()).unwrap();
        assert_eq!(s.rsi.len(), 20);
        assert!(s.rsi[13].is_none() && s.rsi[14] == Some(100.0));
        assert!(s.atr_pct[13].is_none() && s.atr_pct[14].is_some());
    }
}
