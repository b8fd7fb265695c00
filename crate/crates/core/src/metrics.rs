//! Prediction-interval quality: coverage, normalized width, the coverage/width
//! composite, per-level pinball loss and quantile-crossing rate.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{pinball_loss, predict_intervals, repair_monotonic, ModelError, PredictionInterval, QuantileForecast};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {actuals} actuals vs {other} {what}")]
    LengthMismatch {
        actuals: usize,
        other: usize,
        what: &'static str,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("actuals have zero range; normalized width is undefined")]
    ZeroRange,
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Form of the exponent in the coverage/width composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CwcVariant {
    /// `exp(-eta * (picp - (1 - beta)^2))`.
    #[default]
    SquaredNominal,
    /// `exp(-eta * (picp - (1 - beta))^2)`.
    SquaredDeviation,
}

impl CwcVariant {
    pub fn name(self) -> &'static str {
        match self {
            CwcVariant::SquaredNominal => "squared-nominal",
            CwcVariant::SquaredDeviation => "squared-deviation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub beta: f64,
    pub eta: f64,
    pub cwc_variant: CwcVariant,
    /// Number of volatility buckets in the stratified coverage diagnostic.
    pub volatility_buckets: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { beta: 0.1, eta: 30.0, cwc_variant: CwcVariant::SquaredNominal, volatility_buckets: 3 }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(MetricsError::InvalidConfig(format!("beta {} not in (0,1)", self.beta)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(MetricsError::InvalidConfig(format!("eta {} must be positive", self.eta)));
        }
        Ok(())
    }
}

fn check_lengths(actuals: usize, other: usize, what: &'static str) -> Result<()> {
    if actuals != other {
        return Err(MetricsError::LengthMismatch { actuals, other, what });
    }
    if actuals == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Fraction of actuals inside their closed interval.
pub fn picp(actuals: &[f64], intervals: &[PredictionInterval]) -> Result<f64> {
    check_lengths(actuals.len(), intervals.len(), "intervals")?;
    let covered = actuals.iter().zip(intervals).filter(|(y, pi)| pi.contains(**y)).count();
    Ok(covered as f64 / actuals.len() as f64)
}

/// Observed range of the actuals being scored.
pub fn actual_range(actuals: &[f64]) -> Result<f64> {
    if actuals.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let (lo, hi) = actuals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let range = hi - lo;
    if range > 0.0 {
        Ok(range)
    } else {
        Err(MetricsError::ZeroRange)
    }
}

/// Mean interval width divided by the range of the actuals.
pub fn pinaw(actuals: &[f64], intervals: &[PredictionInterval]) -> Result<f64> {
    check_lengths(actuals.len(), intervals.len(), "intervals")?;
    let range = actual_range(actuals)?;
    let total: f64 = intervals.iter().map(PredictionInterval::width).sum();
    Ok(total / (actuals.len() as f64 * range))
}

pub fn cwc(picp: f64, pinaw: f64, config: &MetricConfig) -> f64 {
    let nominal = 1.0 - config.beta;
    let exponent = match config.cwc_variant {
        CwcVariant::SquaredNominal => picp - nominal * nominal,
        CwcVariant::SquaredDeviation => (picp - nominal).powi(2),
    };
    (1.0 - pinaw) * (-config.eta * exponent).exp()
}

/// Fraction of samples with at least one adjacent pair of levels out of order.
pub fn crossing_rate(forecast: &QuantileForecast) -> Result<f64> {
    let n = forecast.num_samples();
    if n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let crossed = forecast.rows().filter(|row| row.windows(2).any(|w| w[0] > w[1])).count();
    Ok(crossed as f64 / n as f64)
}

/// Mean pinball loss of each level column.
pub fn mean_pinball_by_level(actuals: &[f64], forecast: &QuantileForecast) -> Result<Vec<f64>> {
    check_lengths(actuals.len(), forecast.num_samples(), "forecast rows")?;
    let levels = forecast.levels.as_slice();
    let mut totals = vec![0.0; levels.len()];
    for (row, &y) in forecast.rows().zip(actuals) {
        for ((t, &q), &beta) in totals.iter_mut().zip(row).zip(levels) {
            *t += pinball_loss(q, y, beta);
        }
    }
    let n = actuals.len() as f64;
    Ok(totals.into_iter().map(|t| t / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketCoverage {
    /// Inclusive lower and upper bounds of the volatility proxy in this bucket.
    pub low: f64,
    pub high: f64,
    pub n: usize,
    pub picp: f64,
}

/// Coverage stratified into equal-count buckets of a per-sample volatility proxy.
pub fn coverage_by_volatility(
    actuals: &[f64],
    intervals: &[PredictionInterval],
    volatility: &[f64],
    buckets: usize,
) -> Result<Vec<BucketCoverage>> {
    check_lengths(actuals.len(), intervals.len(), "intervals")?;
    check_lengths(actuals.len(), volatility.len(), "volatility values")?;
    if buckets == 0 {
        return Err(MetricsError::InvalidConfig("volatility_buckets must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..actuals.len()).collect();
    order.sort_by(|&a, &b| volatility[a].total_cmp(&volatility[b]));
    let n = order.len();
    let buckets = buckets.min(n);
    Ok((0..buckets)
        .map(|b| {
            let idx = &order[b * n / buckets..(b + 1) * n / buckets];
            let covered = idx.iter().filter(|&&i| intervals[i].contains(actuals[i])).count();
            BucketCoverage {
                low: volatility[idx[0]],
                high: volatility[idx[idx.len() - 1]],
                n: idx.len(),
                picp: covered as f64 / idx.len() as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n: usize,
    pub beta: f64,
    pub eta: f64,
    pub cwc_variant: CwcVariant,
    pub picp: f64,
    pub pinaw: f64,
    pub cwc: f64,
    /// Range of the actuals used to normalize widths.
    pub delta_y: f64,
    pub mean_interval_width: f64,
    /// `(level, mean pinball loss)` for each level.
    pub mean_pinball: Vec<(f64, f64)>,
    /// Mean over levels of `mean_pinball`.
    pub mean_pinball_overall: f64,
    /// Crossing rate of the forecast before repair.
    pub crossing_rate: f64,
    pub coverage_by_volatility: Vec<BucketCoverage>,
}

/// Scores `forecast` against `actuals`, both in the same (price) units.
///
/// `volatility` optionally supplies one proxy value per sample for the stratified
/// coverage diagnostic.
pub fn evaluate(
    actuals: &[f64],
    forecast: &QuantileForecast,
    volatility: Option<&[f64]>,
    config: &MetricConfig,
) -> Result<MetricsReport> {
    config.validate()?;
    check_lengths(actuals.len(), forecast.num_samples(), "forecast rows")?;
    let crossing = crossing_rate(forecast)?;
    let repaired = repair_monotonic(forecast);
    let intervals = predict_intervals(&repaired, config.beta)?;
    let picp_value = picp(actuals, &intervals)?;
    let delta_y = actual_range(actuals)?;
    let pinaw_value = pinaw(actuals, &intervals)?;
    let per_level = mean_pinball_by_level(actuals, &repaired)?;
    let overall = per_level.iter().sum::<f64>() / per_level.len() as f64;
    let buckets = match volatility {
        Some(v) => coverage_by_volatility(actuals, &intervals, v, config.volatility_buckets)?,
        None => Vec::new(),
    };
    Ok(MetricsReport {
        n: actuals.len(),
        beta: config.beta,
        eta: config.eta,
        cwc_variant: config.cwc_variant,
        picp: picp_value,
        pinaw: pinaw_value,
        cwc: cwc(picp_value, pinaw_value, config),
        delta_y,
        mean_interval_width: pinaw_value * delta_y,
        mean_pinball: forecast.levels.as_slice().iter().copied().zip(per_level).collect(),
        mean_pinball_overall: overall,
        crossing_rate: crossing,
        coverage_by_volatility: buckets,
    })
}

impl MetricsReport {
    /// Flat `key = value` text.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "cwc_variant = {}", self.cwc_variant.name());
        let _ = writeln!(s, "picp = {:.6}", self.picp);
        let _ = writeln!(s, "pinaw = {:.6}", self.pinaw);
        let _ = writeln!(s, "cwc = {:.6}", self.cwc);
        let _ = writeln!(s, "delta_y = {:.6}", self.delta_y);
        let _ = writeln!(s, "mean_interval_width = {:.6}", self.mean_interval_width);
        for (level, loss) in &self.mean_pinball {
            let _ = writeln!(s, "pinball_{level} = {loss:.6}");
        }
        let _ = writeln!(s, "pinball_mean = {:.6}", self.mean_pinball_overall);
        let _ = writeln!(s, "crossing_rate = {:.6}", self.crossing_rate);
        for (i, b) in self.coverage_by_volatility.iter().enumerate() {
            let _ = writeln!(
                s,
                "volatility_bucket_{i} = picp {:.6} n {} range [{:.6}, {:.6}]",
                b.picp, b.n, b.low, b.high
            );
        }
        s
    }

    pub const TABLE_HEADER: &'static str = "model,n,picp,pinaw,cwc,cwc_variant,pinball_mean,crossing_rate";

    /// One comparison-table row matching [`Self::TABLE_HEADER`].
    pub fn table_row(&self, model: &str) -> String {
        format!(
            "{model},{},{:.6},{:.6},{:.6},{},{:.6},{:.6}",
            self.n,
            self.picp,
            self.pinaw,
            self.cwc,
            self.cwc_variant.name(),
            self.mean_pinball_overall,
            self.crossing_rate
        )
    }
}
