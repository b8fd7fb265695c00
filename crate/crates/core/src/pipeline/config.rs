//! Run configuration: one TOML file with a section per module. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::backtest::BacktestConfig;
use crate::indicators::IndicatorConfig;
use crate::market_data::{Feature, TickSchema};
use crate::metrics::MetricConfig;
use crate::models::{ModelKind, ModelSpec, QuantileLevels, TrainConfig};
use crate::strategy::StrategyConfig;
use crate::synthetic::SyntheticSpec;

/// Largest allowed deviation of the split fractions' sum from 1.
const SPLIT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Tick file, relative to the config file. Required for `csv`.
    pub path: Option<PathBuf>,
    pub delimiter: char,
    pub bar_interval_ms: i64,
    pub timestamp_tolerance_ms: i64,
    pub features: Vec<Feature>,
    pub window_in: usize,
    /// Step between consecutive training windows.
    pub stride: usize,
    /// Train, validation and test fractions of the bar series, in time order.
    pub split: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            path: None,
            delimiter: ',',
            bar_interval_ms: 60_000,
            timestamp_tolerance_ms: 0,
            features: vec![Feature::Close],
            window_in: 5,
            stride: 1,
            split: [0.7, 0.15, 0.15],
        }
    }
}

/// Architecture section. `window_in` and `num_features` come from `[data]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Model trained by `train`: futurequant, quantile-linear or quantile-mlp.
    pub kind: String,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub key_dim: usize,
    pub conv_channels: usize,
    pub conv_kernel: usize,
    pub dense_units: [usize; 2],
    pub dropout_rate: f64,
    pub layer_norm_eps: f64,
    pub levels: Vec<f64>,
    /// Hidden width of the quantile-mlp baseline.
    pub mlp_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let spec = ModelSpec::default();
        Self {
            kind: ModelKind::FutureQuant.name().to_string(),
            num_blocks: spec.num_blocks,
            num_heads: spec.num_heads,
            key_dim: spec.key_dim,
            conv_channels: spec.conv_channels,
            conv_kernel: spec.conv_kernel,
            dense_units: spec.dense_units,
            dropout_rate: spec.dropout_rate,
            layer_norm_eps: spec.layer_norm_eps,
            levels: spec.levels.into(),
            mlp_hidden: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `train.seed` and `synthetic.seed` when set.
    pub seed: Option<u64>,
    /// Artifact directory, relative to the config file.
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub synthetic: SyntheticSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub metrics: MetricConfig,
    pub indicators: IndicatorConfig,
    pub strategy: StrategyConfig,
    pub backtest: BacktestConfig,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        if let Some(seed) = cfg.seed {
            cfg.set_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base)
    }

    /// Routes one seed to every random source.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.train.seed = seed;
        self.synthetic.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        let d = &self.data;
        if d.split.iter().any(|&s| !(s > 0.0)) || (d.split.iter().sum::<f64>() - 1.0).abs() > SPLIT_SUM_TOLERANCE {
            return bad(format!("data.split fractions must be positive and sum to 1, got {:?}", d.split));
        }
        if d.window_in == 0 || d.stride == 0 {
            return bad("data.window_in and data.stride must be at least 1".into());
        }
        if d.features.is_empty() {
            return bad("data.features must name at least one feature".into());
        }
        if d.bar_interval_ms <= 0 || d.timestamp_tolerance_ms < 0 {
            return bad("data.bar_interval_ms must be positive and timestamp_tolerance_ms non-negative".into());
        }
        if !d.delimiter.is_ascii() {
            return bad(format!("data.delimiter must be a single ASCII character, got {:?}", d.delimiter));
        }
        match d.source {
            DataSource::Csv => {
                let path = self.data_path().ok_or_else(|| PipelineError::Config("data.path is required for source = \"csv\"".into()))?;
                if !path.is_file() {
                    return bad(format!("data.path {} does not exist", path.display()));
                }
            }
            DataSource::Synthetic => {
                if self.synthetic.bar_interval_ms != d.bar_interval_ms {
                    return bad(format!(
                        "synthetic.bar_interval_ms ({}) must equal data.bar_interval_ms ({})",
                        self.synthetic.bar_interval_ms, d.bar_interval_ms
                    ));
                }
            }
        }
        self.synthetic.validate()?;
        self.model_kind()?;
        self.model_spec()?.validate()?;
        if self.model.mlp_hidden == 0 {
            return bad("model.mlp_hidden must be at least 1".into());
        }
        self.train.validate()?;
        self.metrics.validate()?;
        self.indicators.validate()?;
        self.backtest.validate()?;
        if !(self.strategy.transaction_cost >= 0.0) {
            return bad("strategy.transaction_cost must be non-negative".into());
        }
        Ok(())
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        Ok(self.model.kind.parse()?)
    }

    pub fn levels(&self) -> Result<QuantileLevels> {
        Ok(QuantileLevels::new(self.model.levels.clone())?)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        Ok(ModelSpec {
            window_in: self.data.window_in,
            num_features: self.data.features.len(),
            num_blocks: m.num_blocks,
            num_heads: m.num_heads,
            key_dim: m.key_dim,
            conv_channels: m.conv_channels,
            conv_kernel: m.conv_kernel,
            dense_units: m.dense_units,
            dropout_rate: m.dropout_rate,
            layer_norm_eps: m.layer_norm_eps,
            levels: self.levels()?,
        })
    }

    pub fn tick_schema(&self) -> TickSchema {
        TickSchema {
            delimiter: self.data.delimiter as u8,
            timestamp_tolerance_ms: self.data.timestamp_tolerance_ms,
            ..TickSchema::default()
        }
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        self.data.path.as_ref().map(|p| self.base_dir.join(p))
    }

    /// Configured artifact directory, defaulting to `out` next to the config file.
    pub fn out_dir(&self) -> PathBuf {
        self.base_dir.join(self.out_dir.as_deref().unwrap_or(Path::new("out")))
    }
}

/// Bar-index boundaries of the train, validation and test segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Split {
    pub train_end: usize,
    pub val_end: usize,
    pub len: usize,
}

impl Split {
    /// Cuts `len` bars at the cumulative fractions. Each segment must hold at least
    /// one target bar and the training segment a full window before it.
    pub fn new(len: usize, fractions: [f64; 3], window_in: usize) -> Result<Self> {
        let train_end = (len as f64 * fractions[0]).floor() as usize;
        let val_end = (len as f64 * (fractions[0] + fractions[1])).floor() as usize;
        if train_end <= window_in || val_end <= train_end || len <= val_end {
            return Err(PipelineError::Config(format!(
                "{len} bars cannot be split {fractions:?} with window_in {window_in}"
            )));
        }
        Ok(Self { train_end, val_end, len })
    }

    /// Bar ranges whose windows have targets in each segment. Later segments
    /// start `window_in` bars early so their inputs may reach back.
    pub fn ranges(&self, window_in: usize) -> [std::ops::Range<usize>; 3] {
        [
            0..self.train_end,
            self.train_end - window_in..self.val_end,
            self.val_end - window_in..self.len,
        ]
    }
}
