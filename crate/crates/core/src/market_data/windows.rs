use std::fmt;
use std::str::FromStr;

use super::{fit_minmax, Bar, MarketDataError, NormalizationParams, Result, Timestamp};

/// Per-bar input channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Close,
    Spread,
    VolumeDelta,
}

impl Feature {
    pub fn extract(self, bar: &Bar) -> f64 {
        match self {
            Feature::Close => bar.close,
            Feature::Spread => bar.spread,
            Feature::VolumeDelta => bar.volume_delta as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Close => "close",
            Feature::Spread => "spread",
            Feature::VolumeDelta => "volume_delta",
        }
    }

    /// One column per feature, for fitting scalers.
    pub fn columns(features: &[Feature], bars: &[Bar]) -> Vec<Vec<f64>> {
        features
            .iter()
            .map(|f| bars.iter().map(|b| f.extract(b)).collect())
            .collect()
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = MarketDataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "close" => Ok(Feature::Close),
            "spread" => Ok(Feature::Spread),
            "volume_delta" => Ok(Feature::VolumeDelta),
            other => Err(MarketDataError::InvalidArgument(format!("unknown feature `{other}`"))),
        }
    }
}

/// Model-ready samples: `inputs` has shape (N, T, F) and `targets` (N, window_out),
/// both row-major and in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub num_samples: usize,
    pub window_in: usize,
    pub num_features: usize,
    pub window_out: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Input scaling, one column per feature.
    pub norm: NormalizationParams,
    /// Single-column scaling of the close price used for targets.
    pub target_norm: NormalizationParams,
    /// Open time of the last bar in each input window.
    pub input_end_times: Vec<Timestamp>,
    /// Open time of the first target bar of each sample.
    pub target_times: Vec<Timestamp>,
}

impl WindowedDataset {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_samples, self.window_in, self.num_features)
    }

    pub fn sample_len(&self) -> usize {
        self.window_in * self.num_features
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let len = self.sample_len();
        &self.inputs[i * len..(i + 1) * len]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.window_out..(i + 1) * self.window_out]
    }

    /// First target of each sample in price units.
    pub fn targets_in_price_units(&self) -> Vec<f64> {
        (0..self.num_samples)
            .map(|i| self.target_norm.invert(0, self.target(i)[0]))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.num_samples == 0
    }

    /// Single-step dataset from already-scaled arrays, with identity scalers and
    /// sample indices as timestamps.
    pub fn from_arrays(window_in: usize, num_features: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let n = targets.len();
        if inputs.len() != n * window_in * num_features {
            return Err(MarketDataError::InvalidArgument(format!(
                "{} input values for {n} samples of {window_in}x{num_features}",
                inputs.len()
            )));
        }
        Ok(Self {
            num_samples: n,
            window_in,
            num_features,
            window_out: 1,
            inputs,
            targets,
            feature_names: (0..num_features).map(|f| format!("x{f}")).collect(),
            norm: NormalizationParams::new(vec![0.0; num_features], vec![1.0; num_features])?,
            target_norm: NormalizationParams::new(vec![0.0], vec![1.0])?,
            input_end_times: (0..n as i64).map(Timestamp).collect(),
            target_times: (1..=n as i64).map(Timestamp).collect(),
        })
    }
}

/// Fits input and target scalers on a (training) bar slice.
pub fn fit_scalers(bars: &[Bar], features: &[Feature]) -> Result<(NormalizationParams, NormalizationParams)> {
    let norm = fit_minmax(&Feature::columns(features, bars))?;
    let target = fit_minmax(&Feature::columns(&[Feature::Close], bars))?;
    Ok((norm, target))
}

/// Cuts contiguous bars into (input window, following target) samples.
///
/// Sample `i` uses bars `[i*stride, i*stride + window_in)` as input and the
/// closes of the next `window_out` bars as targets.
pub fn make_windows(
    bars: &[Bar],
    features: &[Feature],
    window_in: usize,
    window_out: usize,
    stride: usize,
    norm: &NormalizationParams,
    target_norm: &NormalizationParams,
) -> Result<WindowedDataset> {
    if window_in == 0 || window_out == 0 || stride == 0 || features.is_empty() {
        return Err(MarketDataError::InvalidArgument(
            "window_in, window_out, stride and the feature list must be non-empty".into(),
        ));
    }
    if norm.num_features() != features.len() || target_norm.num_features() != 1 {
        return Err(MarketDataError::InvalidArgument(format!(
            "scaler has {} features, selector has {}",
            norm.num_features(),
            features.len()
        )));
    }
    let needed = window_in + window_out;
    if bars.len() < needed {
        return Err(MarketDataError::InsufficientData { needed, available: bars.len() });
    }
    let n = (bars.len() - needed) / stride + 1;
    let f = features.len();

    let mut inputs = Vec::with_capacity(n * window_in * f);
    let mut targets = Vec::with_capacity(n * window_out);
    let mut input_end_times = Vec::with_capacity(n);
    let mut target_times = Vec::with_capacity(n);
    for i in 0..n {
        let start = i * stride;
        for bar in &bars[start..start + window_in] {
            for (k, feat) in features.iter().enumerate() {
                inputs.push(norm.apply(k, feat.extract(bar)));
            }
        }
        let target_bars = &bars[start + window_in..start + needed];
        targets.extend(target_bars.iter().map(|b| target_norm.apply(0, b.close)));
        input_end_times.push(bars[start + window_in - 1].open_time);
        target_times.push(target_bars[0].open_time);
    }

    Ok(WindowedDataset {
        num_samples: n,
        window_in,
        num_features: f,
        window_out,
        inputs,
        targets,
        feature_names: features.iter().map(|f| f.name().to_string()).collect(),
        norm: norm.clone(),
        target_norm: target_norm.clone(),
        input_end_times,
        target_times,
    })
}

/// Flattened input windows ending at every bar from `window_in - 1` onward, with the
/// open time of each window's last bar. No targets are needed, so the final bar gets a window too.
pub fn decision_inputs(
    bars: &[Bar],
    features: &[Feature],
    window_in: usize,
    norm: &NormalizationParams,
) -> Result<(Vec<f64>, Vec<Timestamp>)> {
    if window_in == 0 || features.is_empty() || norm.num_features() != features.len() {
        return Err(MarketDataError::InvalidArgument(
            "window_in must be positive and the scaler must match the feature list".into(),
        ));
    }
    if bars.len() < window_in {
        return Err(MarketDataError::InsufficientData { needed: window_in, available: bars.len() });
    }
    let mut inputs = Vec::with_capacity((bars.len() - window_in + 1) * window_in * features.len());
    let mut times = Vec::with_capacity(bars.len() - window_in + 1);
    for window in bars.windows(window_in) {
        for bar in window {
            inputs.extend(features.iter().enumerate().map(|(k, f)| norm.apply(k, f.extract(bar))));
        }
        times.push(window[window_in - 1].open_time);
    }
    Ok((inputs, times))
}
