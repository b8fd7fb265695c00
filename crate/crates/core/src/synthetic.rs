//! Price series with closed-form conditional quantiles, for checking calibration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::market_data::{resample, Bar, TickRecord, Timestamp};

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T, E = SyntheticError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// `x' = phi x + sigma0 e`.
    GaussianAr1,
    /// `x' = phi x + sigma0 (1 + kappa |x|) e`.
    #[default]
    HeteroscedasticAr1,
    /// `x' = phi x + (1 - phi) m[s'] + sigma0 e`, where the two-state regime `s`
    /// flips with probability `switch_prob` before each step.
    RegimeSwitch,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::GaussianAr1 => "gaussian-ar1",
            SyntheticKind::HeteroscedasticAr1 => "heteroscedastic-ar1",
            SyntheticKind::RegimeSwitch => "regime-switch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    /// Number of bars.
    pub length: usize,
    pub seed: u64,
    pub phi: f64,
    pub sigma0: f64,
    pub kappa: f64,
    pub regime_means: [f64; 2],
    pub switch_prob: f64,
    /// Price around which the deviation `x` fluctuates.
    pub level: f64,
    pub bar_interval_ms: i64,
    pub ticks_per_bar: usize,
    pub half_spread: f64,
    /// Open time of the first bar, in epoch milliseconds.
    pub start_ms: i64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::HeteroscedasticAr1,
            length: 5000,
            seed: 0,
            phi: 0.9,
            sigma0: 1.0,
            kappa: 0.3,
            regime_means: [-2.0, 2.0],
            switch_prob: 0.02,
            level: 100.0,
            bar_interval_ms: 60_000,
            ticks_per_bar: 4,
            half_spread: 0.05,
            // 2023-12-01 00:00:00 UTC
            start_ms: 1_701_388_800_000,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SyntheticError::InvalidSpec(msg));
        if !(self.phi.abs() < 1.0) {
            return bad(format!("|phi| must be below 1, got {}", self.phi));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if !(0.0..=1.0).contains(&self.switch_prob) {
            return bad(format!("switch_prob must be in [0,1], got {}", self.switch_prob));
        }
        if self.length < 2 {
            return bad("length must be at least 2".into());
        }
        if self.bar_interval_ms <= 0 || self.ticks_per_bar == 0 || self.bar_interval_ms < self.ticks_per_bar as i64 {
            return bad("bar_interval_ms must be positive and at least ticks_per_bar".into());
        }
        if !(self.level > 0.0 && self.half_spread >= 0.0) {
            return bad("level must be positive and half_spread non-negative".into());
        }
        Ok(())
    }
}

/// Generated series: deviation `x_t`, regime `s_t` and price `level + x_t` per bar.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSeries {
    pub spec: SyntheticSpec,
    pub states: Vec<f64>,
    pub regimes: Vec<u8>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut states = Vec::with_capacity(spec.length);
    let mut regimes = Vec::with_capacity(spec.length);
    let mut x = 0.0;
    let mut s = 0u8;
    for _ in 0..spec.length {
        states.push(x);
        regimes.push(s);
        let e: f64 = rng.sample(StandardNormal);
        let flip = rng.random::<f64>() < spec.switch_prob;
        x = match spec.kind {
            SyntheticKind::GaussianAr1 => spec.phi * x + spec.sigma0 * e,
            SyntheticKind::HeteroscedasticAr1 => spec.phi * x + spec.sigma0 * (1.0 + spec.kappa * x.abs()) * e,
            SyntheticKind::RegimeSwitch => {
                if flip {
                    s = 1 - s;
                }
                spec.phi * x + (1.0 - spec.phi) * spec.regime_means[s as usize] + spec.sigma0 * e
            }
        };
    }
    let series = SyntheticSeries { spec: spec.clone(), states, regimes };
    if series.prices().any(|p| p <= spec.half_spread) {
        return Err(SyntheticError::InvalidSpec(
            "series reached a non-positive price; raise `level`".into(),
        ));
    }
    Ok(series)
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Quantile of an equal-variance two-component normal mixture, by bisection.
fn mixture_quantile(weights: [f64; 2], means: [f64; 2], sigma: f64, beta: f64) -> f64 {
    let n = standard_normal();
    let cdf = |y: f64| weights[0] * n.cdf((y - means[0]) / sigma) + weights[1] * n.cdf((y - means[1]) / sigma);
    let mut lo = means[0].min(means[1]) - 40.0 * sigma;
    let mut hi = means[0].max(means[1]) + 40.0 * sigma;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < beta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

impl SyntheticSeries {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|x| self.spec.level + x)
    }

    /// True `beta`-quantile of the price at bar `t + 1` given everything up to bar `t`.
    pub fn oracle_quantile(&self, t: usize, beta: f64) -> f64 {
        let sp = &self.spec;
        let x = self.states[t];
        let z = standard_normal().inverse_cdf(beta);
        let deviation = match sp.kind {
            SyntheticKind::GaussianAr1 => sp.phi * x + sp.sigma0 * z,
            SyntheticKind::HeteroscedasticAr1 => sp.phi * x + sp.sigma0 * (1.0 + sp.kappa * x.abs()) * z,
            SyntheticKind::RegimeSwitch => {
                let s = self.regimes[t] as usize;
                let mean = |r: usize| sp.phi * x + (1.0 - sp.phi) * sp.regime_means[r];
                mixture_quantile([1.0 - sp.switch_prob, sp.switch_prob], [mean(s), mean(1 - s)], sp.sigma0, beta)
            }
        };
        sp.level + deviation
    }

    /// Oracle quantiles at each of `levels`, ascending.
    pub fn oracle_row(&self, t: usize, levels: &[f64]) -> Vec<f64> {
        levels.iter().map(|&b| self.oracle_quantile(t, b)).collect()
    }

    pub fn bar_open_time(&self, t: usize) -> Timestamp {
        Timestamp(self.spec.start_ms + t as i64 * self.spec.bar_interval_ms)
    }

    /// Bar index whose open time is `ts`, if any.
    pub fn bar_index(&self, ts: Timestamp) -> Option<usize> {
        let offset = ts.0 - self.spec.start_ms;
        (offset >= 0 && offset % self.spec.bar_interval_ms == 0)
            .then(|| (offset / self.spec.bar_interval_ms) as usize)
            .filter(|&t| t < self.len())
    }

    /// Ticks whose resampled bars close at the series prices. Intra-bar ticks wander
    /// between the previous and current price; they never affect closes.
    pub fn to_ticks(&self) -> Vec<TickRecord> {
        let sp = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(sp.seed);
        rng.set_stream(1);
        let m = sp.ticks_per_bar;
        let step = sp.bar_interval_ms / m as i64;
        let mut volume = 0u64;
        let mut ticks = Vec::with_capacity(self.len() * m);
        let mut prev = sp.level + self.states[0];
        for (t, price) in self.prices().enumerate() {
            let open = self.bar_open_time(t).0;
            for k in 0..m {
                let last_price = if k + 1 == m {
                    price
                } else {
                    let frac = (k + 1) as f64 / m as f64;
                    let jitter: f64 = rng.sample::<f64, _>(StandardNormal) * 0.25 * sp.sigma0;
                    (prev + frac * (price - prev) + jitter).max(sp.half_spread + sp.level * 1e-6)
                };
                volume += rng.random_range(1..=20);
                ticks.push(TickRecord {
                    timestamp: Timestamp(open + k as i64 * step),
                    last_price,
                    volume,
                    bid_price1: last_price - sp.half_spread,
                    bid_volume1: rng.random_range(1..=50),
                    ask_price1: last_price + sp.half_spread,
                    ask_volume1: rng.random_range(1..=50),
                });
            }
            prev = price;
        }
        ticks
    }

    /// Bars built by resampling [`Self::to_ticks`].
    pub fn to_bars(&self) -> Vec<Bar> {
        resample(&self.to_ticks(), self.spec.bar_interval_ms).expect("generated ticks are well-formed")
    }
}
