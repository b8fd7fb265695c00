//! Signal generation from indicators and the one-unit position policy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::indicators::IndicatorConfig;
use crate::market_data::Bar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SignalKind {
    Buy,
    Sell,
    None,
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalKind::Buy => "buy",
            SignalKind::Sell => "sell",
            SignalKind::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Signal {
    pub kind: SignalKind,
    /// Decision branch that produced the signal.
    pub reason: &'static str,
}

impl Signal {
    const fn new(kind: SignalKind, reason: &'static str) -> Self {
        Self { kind, reason }
    }

    pub const fn none(reason: &'static str) -> Self {
        Self::new(SignalKind::None, reason)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// Compare the over-bought price against the upper band instead of the lower band.
    pub sell_vs_upper_band: bool,
    /// Allow short positions; when false a Sell only closes a long.
    pub allow_short: bool,
    /// Cost per fill as a fraction of the fill price.
    pub transaction_cost: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self { sell_vs_upper_band: false, allow_short: true, transaction_cost: 0.0 }
    }
}

/// Market state at one decision bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalInputs {
    pub price: f64,
    pub atr_pct: f64,
    pub lower_band: f64,
    pub upper_band: f64,
    pub rsi: f64,
}

/// The decision tree with the over-bought branch compared against the lower band.
pub fn generate_signal(price: f64, atr_pct: f64, lower_band: f64, rsi: f64, config: &IndicatorConfig) -> Signal {
    let inputs = SignalInputs { price, atr_pct, lower_band, upper_band: f64::NAN, rsi };
    generate_signal_with(&inputs, config, false)
}

pub fn generate_signal_with(inputs: &SignalInputs, config: &IndicatorConfig, sell_vs_upper_band: bool) -> Signal {
    let in_band = inputs.atr_pct >= config.atr_low && inputs.atr_pct < config.atr_high;
    let too_volatile = inputs.atr_pct >= config.atr_high;
    if inputs.rsi < 30.0 {
        if inputs.price < config.threshold * inputs.lower_band {
            if in_band {
                return Signal::new(SignalKind::Buy, "oversold-buy");
            } else if too_volatile {
                return Signal::none("oversold-high-atr");
            }
        }
    } else if inputs.rsi > 70.0 {
        let band = if sell_vs_upper_band { inputs.upper_band } else { inputs.lower_band };
        if inputs.price > config.threshold * band {
            if in_band {
                return Signal::new(SignalKind::Sell, "overbought-sell");
            } else if too_volatile {
                return Signal::none("overbought-high-atr");
            }
        }
    }
    Signal::none("default")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Flat,
    Long,
    Short,
}

impl Side {
    /// +1 long, -1 short, 0 flat.
    pub fn sign(self) -> f64 {
        match self {
            Side::Flat => 0.0,
            Side::Long => 1.0,
            Side::Short => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Flat => "flat",
            Side::Long => "long",
            Side::Short => "short",
        })
    }
}

/// Position held during a bar, after any fill at that bar's open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositionState {
    pub side: Side,
    pub entry_price: Option<f64>,
    pub entry_index: Option<usize>,
}

impl PositionState {
    pub const FLAT: PositionState = PositionState { side: Side::Flat, entry_price: None, entry_index: None };

    fn open(side: Side, price: f64, index: usize) -> Self {
        Self { side, entry_price: Some(price), entry_index: Some(index) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trade {
    pub side: Side,
    pub entry_index: usize,
    pub entry_price: f64,
    pub exit_index: usize,
    pub exit_price: f64,
    /// Per-unit profit before costs.
    pub pnl: f64,
    /// Entry plus exit cost.
    pub cost: f64,
}

impl Trade {
    pub fn net_pnl(&self) -> f64 {
        self.pnl - self.cost
    }

    /// Net profit relative to the entry price.
    pub fn return_on_entry(&self) -> f64 {
        self.net_pnl() / self.entry_price
    }
}

fn close_trade(pos: &PositionState, exit_index: usize, exit_price: f64, cost_rate: f64) -> Trade {
    let entry_price = pos.entry_price.expect("open position has an entry price");
    Trade {
        side: pos.side,
        entry_index: pos.entry_index.expect("open position has an entry index"),
        entry_price,
        exit_index,
        exit_price,
        pnl: pos.side.sign() * (exit_price - entry_price),
        cost: cost_rate * (entry_price + exit_price),
    }
}

fn target_side(current: Side, signal: SignalKind, allow_short: bool) -> Side {
    match (signal, current) {
        (SignalKind::Buy, _) => Side::Long,
        (SignalKind::Sell, _) if allow_short => Side::Short,
        (SignalKind::Sell, Side::Long) => Side::Flat,
        (_, side) => side,
    }
}

/// Folds signals into positions. A signal at bar `i` fills at the open of bar `i + 1`;
/// signals on the last bar are ignored and any open position is closed at the last close.
///
/// Returns one state per bar and the completed trades.
pub fn positions_from_signals(
    signals: &[SignalKind],
    bars: &[Bar],
    config: &StrategyConfig,
) -> (Vec<PositionState>, Vec<Trade>) {
    assert_eq!(signals.len(), bars.len(), "one signal per bar");
    let mut states = Vec::with_capacity(bars.len());
    let mut trades = Vec::new();
    let mut pos = PositionState::FLAT;
    for (i, bar) in bars.iter().enumerate() {
        if i > 0 {
            let want = target_side(pos.side, signals[i - 1], config.allow_short);
            if want != pos.side {
                if pos.side != Side::Flat {
                    trades.push(close_trade(&pos, i, bar.open, config.transaction_cost));
                }
                pos = if want == Side::Flat { PositionState::FLAT } else { PositionState::open(want, bar.open, i) };
            }
        }
        states.push(pos);
    }
    if let (Some(last), true) = (bars.last(), pos.side != Side::Flat) {
        trades.push(close_trade(&pos, bars.len() - 1, last.close, config.transaction_cost));
    }
    (states, trades)
}
