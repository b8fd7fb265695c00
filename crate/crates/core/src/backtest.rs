//! Strategy simulation over bars: equity curve, drawdowns and summary statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{
    bands_from_forecast, indicator_series, shape_from_quantiles, BandSet, IndicatorConfig, IndicatorError,
    IndicatorSeries, ShapeEstimate,
};
use crate::market_data::Bar;
use crate::models::{repair_monotonic, QuantileForecast};
use crate::strategy::{
    generate_signal_with, positions_from_signals, PositionState, Signal, SignalInputs, SignalKind, StrategyConfig,
    Trade,
};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("return {value} at period {index} wipes out the account")]
    RuinousReturn { index: usize, value: f64 },
    #[error("forecast is not aligned with bars: {0}")]
    Alignment(String),
    #[error("invalid backtest config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

pub type Result<T, E = BacktestError> = std::result::Result<T, E>;

/// Drawdowns above this fraction are counted.
pub const DRAWDOWN_COUNT_THRESHOLD: f64 = 0.001;

/// Compounded return `prod(1 + r_i) - 1`.
pub fn cumulative_return(returns: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (index, &r) in returns.iter().enumerate() {
        if r <= -1.0 || !r.is_finite() {
            return Err(BacktestError::RuinousReturn { index, value: r });
        }
        // (1 + acc)(1 + r) - 1 without forming the products near 1
        acc = acc + r + acc * r;
    }
    Ok(acc)
}

/// Final balance after one period at `period_return`.
pub fn scenario_test(initial_funds: f64, period_return: f64) -> f64 {
    initial_funds * (1.0 + period_return)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawdownStats {
    /// Fractional decline from the running peak, as a positive magnitude.
    pub series: Vec<f64>,
    pub max_drawdown: f64,
    pub count_over_threshold: usize,
}

pub fn drawdown(equity: &[f64]) -> DrawdownStats {
    let mut peak = f64::NEG_INFINITY;
    let series: Vec<f64> = equity
        .iter()
        .map(|&e| {
            peak = peak.max(e);
            (peak - e) / peak
        })
        .collect();
    let max_drawdown = series.iter().copied().fold(0.0, f64::max);
    let count_over_threshold = series.iter().filter(|&&d| d > DRAWDOWN_COUNT_THRESHOLD).count();
    DrawdownStats { series, max_drawdown, count_over_threshold }
}

/// Equity marked at each bar close. `returns[0]` is 0 and
/// `equity[i] = equity[i - 1] * (1 + returns[i])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityCurve {
    pub equity: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Named horizon, in bars, for compounded summary returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub name: String,
    pub bars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub initial_capital: f64,
    pub horizons: Vec<Horizon>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        let h = |name: &str, bars| Horizon { name: name.into(), bars };
        Self {
            initial_capital: 1_000_000.0,
            // one-minute bars, 555 trading minutes per day
            horizons: vec![h("30-min", 30), h("1-month", 21 * 555), h("1-year", 252 * 555)],
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return Err(BacktestError::InvalidConfig(format!(
                "initial_capital {} must be positive",
                self.initial_capital
            )));
        }
        if let Some(h) = self.horizons.iter().find(|h| h.bars == 0) {
            return Err(BacktestError::InvalidConfig(format!("horizon `{}` has zero bars", h.name)));
        }
        Ok(())
    }
}

/// Marks one-unit positions to market at each close.
///
/// Bar `i` earns `prev_side * (open_i - close_{i-1}) + side_i * (close_i - open_i)`
/// minus fill costs; the final bar also pays the cost of the forced close.
pub fn equity_curve(
    bars: &[Bar],
    positions: &[PositionState],
    config: &StrategyConfig,
    initial_capital: f64,
) -> Result<EquityCurve> {
    let n = bars.len();
    let mut equity = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    let mut current = initial_capital;
    for i in 0..n {
        let side = positions[i].side;
        let mut pnl = side.sign() * (bars[i].close - bars[i].open);
        if i > 0 {
            let prev = positions[i - 1];
            pnl += prev.side.sign() * (bars[i].open - bars[i - 1].close);
            let refilled = prev.side != side || prev.entry_index != positions[i].entry_index;
            if refilled {
                let fills = prev.side.sign().abs() + side.sign().abs();
                pnl -= config.transaction_cost * fills * bars[i].open;
            }
        }
        if i + 1 == n {
            pnl -= config.transaction_cost * side.sign().abs() * bars[i].close;
        }
        let r = pnl / current;
        if r <= -1.0 || !r.is_finite() {
            return Err(BacktestError::RuinousReturn { index: i, value: r });
        }
        current *= 1.0 + r;
        returns.push(r);
        equity.push(current);
    }
    Ok(EquityCurve { equity, returns })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonReturn {
    pub name: String,
    pub bars: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestSummary {
    pub num_bars: usize,
    pub initial_capital: f64,
    pub final_equity: f64,
    pub cumulative_return: f64,
    /// Run return compounded to each horizon: `(1 + R)^(h / num_bars) - 1`.
    pub horizon_returns: Vec<HorizonReturn>,
    /// Standard deviation of per-bar returns.
    pub volatility: f64,
    pub max_drawdown: f64,
    pub drawdown_count: usize,
    pub num_trades: usize,
    /// Mean net return of a trade relative to its entry price.
    pub mean_trade_return: f64,
    pub win_rate: f64,
}

impl BacktestSummary {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# horizon returns compound the run's per-bar geometric mean return: (1+R)^(h/num_bars)-1");
        let _ = writeln!(s, "# volatility is the sample standard deviation of per-bar returns");
        let _ = writeln!(s, "num_bars = {}", self.num_bars);
        let _ = writeln!(s, "initial_capital = {:.2}", self.initial_capital);
        let _ = writeln!(s, "final_equity = {:.2}", self.final_equity);
        let _ = writeln!(s, "cumulative_return = {:.8}", self.cumulative_return);
        for h in &self.horizon_returns {
            let _ = writeln!(s, "cumulative_return_{} = {:.8}", h.name, h.value);
        }
        let _ = writeln!(s, "volatility = {:.8}", self.volatility);
        let _ = writeln!(s, "max_drawdown = {:.8}", self.max_drawdown);
        let _ = writeln!(s, "drawdown_count = {}", self.drawdown_count);
        let _ = writeln!(s, "num_trades = {}", self.num_trades);
        let _ = writeln!(s, "mean_trade_return = {:.8}", self.mean_trade_return);
        let _ = writeln!(s, "win_rate = {:.6}", self.win_rate);
        s
    }
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn summarize(curve: &EquityCurve, trades: &[Trade], initial_capital: f64, horizons: &[Horizon]) -> Result<BacktestSummary> {
    let total = cumulative_return(&curve.returns)?;
    let n = curve.returns.len();
    let horizon_returns = horizons
        .iter()
        .map(|h| HorizonReturn {
            name: h.name.clone(),
            bars: h.bars,
            value: if n == 0 { 0.0 } else { (1.0 + total).powf(h.bars as f64 / n as f64) - 1.0 },
        })
        .collect();
    let dd = drawdown(&curve.equity);
    let (mean_trade_return, win_rate) = if trades.is_empty() {
        (0.0, 0.0)
    } else {
        let k = trades.len() as f64;
        (
            trades.iter().map(Trade::return_on_entry).sum::<f64>() / k,
            trades.iter().filter(|t| t.net_pnl() > 0.0).count() as f64 / k,
        )
    };
    Ok(BacktestSummary {
        num_bars: n,
        initial_capital,
        final_equity: curve.equity.last().copied().unwrap_or(initial_capital),
        cumulative_return: total,
        horizon_returns,
        volatility: std_dev(&curve.returns),
        max_drawdown: dd.max_drawdown,
        drawdown_count: dd.count_over_threshold,
        num_trades: trades.len(),
        mean_trade_return,
        win_rate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRun {
    pub positions: Vec<PositionState>,
    pub trades: Vec<Trade>,
    pub curve: EquityCurve,
    pub drawdown: DrawdownStats,
    pub summary: BacktestSummary,
}

/// Executes precomputed signals.
pub fn simulate(
    bars: &[Bar],
    signals: &[SignalKind],
    strategy: &StrategyConfig,
    config: &BacktestConfig,
) -> Result<BacktestRun> {
    config.validate()?;
    if signals.len() != bars.len() {
        return Err(BacktestError::Alignment(format!("{} signals for {} bars", signals.len(), bars.len())));
    }
    if !(strategy.transaction_cost >= 0.0) {
        return Err(BacktestError::InvalidConfig("transaction_cost must be non-negative".into()));
    }
    let (positions, trades) = positions_from_signals(signals, bars, strategy);
    let curve = equity_curve(bars, &positions, strategy, config.initial_capital)?;
    let drawdown = drawdown(&curve.equity);
    let summary = summarize(&curve, &trades, config.initial_capital, &config.horizons)?;
    Ok(BacktestRun { positions, trades, curve, drawdown, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub signals: Vec<Signal>,
    pub indicators: IndicatorSeries,
    pub bands: Vec<BandSet>,
    pub shapes: Vec<ShapeEstimate>,
    pub run: BacktestRun,
}

/// Full strategy run: `forecast` row `i` is the price-unit forecast issued at the close of `bars[i]`.
pub fn run_backtest(
    bars: &[Bar],
    forecast: &QuantileForecast,
    indicators: &IndicatorConfig,
    strategy: &StrategyConfig,
    config: &BacktestConfig,
) -> Result<BacktestResult> {
    if forecast.num_samples() != bars.len() {
        return Err(BacktestError::Alignment(format!(
            "{} forecast rows for {} bars",
            forecast.num_samples(),
            bars.len()
        )));
    }
    let repaired = repair_monotonic(forecast);
    let bands = (0..bars.len())
        .map(|i| bands_from_forecast(&repaired, i))
        .collect::<Result<Vec<_>, _>>()?;
    let shapes = repaired
        .rows()
        .map(|row| shape_from_quantiles(row, repaired.levels.as_slice()))
        .collect::<Result<Vec<_>, _>>()?;
    let median: Vec<f64> = bands.iter().map(|b| b.middle).collect();
    let series = indicator_series(bars, Some(&median), indicators)?;
    let signals: Vec<Signal> = (0..bars.len())
        .map(|i| match (series.rsi[i], series.atr_pct[i]) {
            (Some(rsi), Some(atr_pct)) => generate_signal_with(
                &SignalInputs {
                    price: bars[i].close,
                    atr_pct,
                    lower_band: bands[i].lower,
                    upper_band: bands[i].upper,
                    rsi,
                },
                indicators,
                strategy.sell_vs_upper_band,
            ),
            _ => Signal::none("warmup"),
        })
        .collect();
    let kinds: Vec<SignalKind> = signals.iter().map(|s| s.kind).collect();
    let run = simulate(bars, &kinds, strategy, config)?;
    Ok(BacktestResult { signals, indicators: series, bands, shapes, run })
}

/// Dependency-free SVG line chart of one or more equally long series.
pub fn svg_line_chart(title: &str, series: &[(&str, &[f64])]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, if hi > lo { hi } else { lo + 1.0 }) } else { (0.0, 1.0) };
    let len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (len - 1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="25" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#888" points="{PAD},{PAD} {PAD},{} {},{}"/>"##,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(s, r#"<text x="5" y="{}" font-family="sans-serif" font-size="11">{hi:.4}</text>"#, PAD + 4.0);
    let _ = writeln!(s, r#"<text x="5" y="{}" font-family="sans-serif" font-size="11">{lo:.4}</text>"#, H - PAD);
    for (k, (name, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, points.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            W - PAD - 150.0,
            PAD + 15.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Timestamp;

    #[test]
    fn cumulative_return_spot_values() {
        assert_eq!(cumulative_return(&[0.1, -0.05]).unwrap(), 0.045);
        assert_eq!(cumulative_return(&[0.0; 5]).unwrap(), 0.0);
        assert_eq!(cumulative_return(&[0.37]).unwrap(), 0.37);
        assert!(matches!(cumulative_return(&[0.1, -1.0]), Err(BacktestError::RuinousReturn { index: 1, .. })));
    }

    #[test]
    fn drawdown_spot_values() {
        let d = drawdown(&[100.0, 110.0, 99.0]);
        assert_eq!(d.series[..2], [0.0, 0.0]);
        assert!((d.max_drawdown - 0.1).abs() < 1e-12);
        let up = drawdown(&[1.0, 2.0, 3.0]);
        assert_eq!((up.max_drawdown, up.count_over_threshold), (0.0, 0));
        let v = drawdown(&[100.0, 50.0, 100.0]);
        assert_eq!((v.max_drawdown, v.count_over_threshold), (0.5, 1));
    }

    #[test]
    fn scenario_arithmetic() {
        assert_eq!(scenario_test(1_000_000.0, 0.0), 1_000_000.0);
        assert!((scenario_test(1_000_000.0, 0.14316) - 1_143_160.0).abs() < 1e-6);
    }

    #[test]
    fn one_trade_scenario() {
        use SignalKind::*;
        let closes = [100.0, 100.0, 101.0, 101.5, 102.0];
        let bars: Vec<Bar> = closes.iter().enumerate().map(|(i, &p)| Bar::flat(Timestamp(i as i64), p)).collect();
        let config = BacktestConfig { initial_capital: 100.0, ..BacktestConfig::default() };
        let run = simulate(&bars, &[Buy, None, None, None, None], &StrategyConfig::default(), &config).unwrap();
        assert!((run.summary.cumulative_return - 0.02).abs() < 1e-12);
        assert_eq!(run.trades.len(), 1);
        assert_eq!(run.curve.returns[0], 0.0);
    }

    #[test]
    fn svg_contains_one_polyline_per_series() {
        let a = [1.0, 2.0, 3.0];
        let b = [3.0, 1.0, 2.0];
        let svg = svg_line_chart("equity & drawdown", &[("a", &a), ("b", &b)]);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("equity &amp; drawdown"));
    }
}
