//! Quantile-output forecasting models and their training machinery.
//!
//! All models implement [`QuantileModel`]: a per-sample forward pass producing
//! one value per quantile level and a per-sample backward pass that
//! accumulates parameter gradients of the mean pinball loss. Training,
//! gradient checking and checkpointing work on any implementor.

mod checkpoint;
mod gradcheck;
mod layers;
mod linalg;
mod linear;
mod mlp;
mod params;
mod quantile;
mod train;
mod transformer;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use thiserror::Error;

use crate::market_data::WindowedDataset;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, AnyModel, CHECKPOINT_HEADER};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use layers::{
    conv_feedforward, global_average_pool, layer_norm, multi_head_attention, AttentionOutput, AttentionWeights,
    DEFAULT_LAYER_NORM_EPS,
};
pub use linalg::Matrix;
pub use linear::QuantileLinear;
pub use mlp::QuantileMlp;
pub use params::{Init, ParameterSet, TensorInfo};
pub use quantile::{
    interval_columns, pinball_grad, pinball_loss, predict_intervals, repair_monotonic, PredictionInterval,
    QuantileForecast, QuantileLevels,
};
pub use train::{evaluate_loss, train, Optimizer, TrainConfig, TrainOutcome};
pub use transformer::{encoder_block, forward, Mode, ModelSpec, QuantileTransformer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid quantile levels: {0}")]
    InvalidLevels(String),
    #[error("quantile level {0} is not among the forecast levels")]
    MissingLevel(f64),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite ({loss}) at epoch {epoch}, batch {batch}; gradient norm {grad_norm}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
        grad_norm: f64,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Objective applied to each sample's vector of level outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    /// Pinball loss averaged over levels.
    #[default]
    Pinball,
    /// Squared error against the target averaged over levels; used to check gradients
    /// of smooth models.
    Squared,
}

impl LossKind {
    /// Loss of one sample and its derivative with respect to each output.
    pub fn evaluate(self, outputs: &[f64], target: f64, levels: &[f64], dout: &mut [f64]) -> f64 {
        let q = outputs.len() as f64;
        let mut total = 0.0;
        for ((&o, &beta), d) in outputs.iter().zip(levels).zip(dout.iter_mut()) {
            match self {
                LossKind::Pinball => {
                    total += pinball_loss(o, target, beta);
                    *d = pinball_grad(o, target, beta) / q;
                }
                LossKind::Squared => {
                    let r = o - target;
                    total += r * r;
                    *d = 2.0 * r / q;
                }
            }
        }
        total / q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    FutureQuant,
    QuantileLinear,
    QuantileMlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::FutureQuant, ModelKind::QuantileLinear, ModelKind::QuantileMlp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FutureQuant => "futurequant",
            ModelKind::QuantileLinear => "quantile-linear",
            ModelKind::QuantileMlp => "quantile-mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ModelError::InvalidSpec(format!("unknown model kind `{s}`")))
    }
}

/// A model mapping one `(window_in x num_features)` window to one value per quantile level.
pub trait QuantileModel {
    fn kind(&self) -> ModelKind;
    fn levels(&self) -> &QuantileLevels;
    fn window_in(&self) -> usize;
    fn num_features(&self) -> usize;
    fn params(&self) -> &ParameterSet;
    fn params_mut(&mut self) -> &mut ParameterSet;

    /// Eval-mode forward pass of one flattened window.
    fn forward_sample(&self, input: &[f64]) -> Vec<f64>;

    /// Forward and backward pass of one sample. Adds `scale * dLoss/dParams` into
    /// `grad` and returns the sample loss. `dropout` is `Some` in training mode.
    fn backward_sample(
        &self,
        input: &[f64],
        target: f64,
        loss: LossKind,
        dropout: Option<&mut dyn RngCore>,
        scale: f64,
        grad: &mut [f64],
    ) -> f64;

    /// Whether each ReLU pre-activation is positive, in a fixed order.
    fn activation_pattern(&self, input: &[f64]) -> Vec<bool>;

    fn input_len(&self) -> usize {
        self.window_in() * self.num_features()
    }

    fn check_dataset(&self, ds: &WindowedDataset) -> Result<()> {
        if ds.window_in != self.window_in() || ds.num_features != self.num_features() {
            return Err(ModelError::ShapeMismatch(format!(
                "dataset windows are {}x{}, model expects {}x{}",
                ds.window_in,
                ds.num_features,
                self.window_in(),
                self.num_features()
            )));
        }
        Ok(())
    }

    /// Eval-mode forecast for every sample, in normalized target units.
    fn predict(&self, ds: &WindowedDataset) -> Result<QuantileForecast> {
        self.check_dataset(ds)?;
        let mut values = Vec::with_capacity(ds.num_samples * self.levels().len());
        for i in 0..ds.num_samples {
            values.extend(self.forward_sample(ds.input(i)));
        }
        QuantileForecast::new(self.levels().clone(), values)
    }
}

/// Splits `buf` into disjoint mutable views, one per range.
pub(crate) fn split_ranges_mut<'a, const N: usize>(
    buf: &'a mut [f64],
    ranges: [&std::ops::Range<usize>; N],
) -> [&'a mut [f64]; N] {
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by_key(|&i| ranges[i].start);
    let mut out: [Option<&'a mut [f64]>; N] = std::array::from_fn(|_| None);
    let mut rest = buf;
    let mut consumed = 0;
    for &i in &order {
        let r = ranges[i];
        assert!(r.start >= consumed, "overlapping parameter ranges");
        let tail = std::mem::take(&mut rest);
        let (_, tail) = tail.split_at_mut(r.start - consumed);
        let (mine, tail) = tail.split_at_mut(r.len());
        out[i] = Some(mine);
        rest = tail;
        consumed = r.end;
    }
    out.map(|o| o.expect("every range assigned"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_kinds() {
        let mut d = [0.0; 2];
        let l = LossKind::Pinball.evaluate(&[10.0, 10.0], 12.0, &[0.9, 0.1], &mut d);
        assert!((l - (1.8 + 0.2) / 2.0).abs() < 1e-12);
        assert_eq!(d, [-0.45, -0.05]);
        let l = LossKind::Squared.evaluate(&[1.0, 3.0], 2.0, &[0.1, 0.9], &mut d);
        assert_eq!(l, 1.0);
        assert_eq!(d, [-1.0, 1.0]);
    }

    #[test]
    fn split_ranges() {
        let mut buf: Vec<f64> = (0..10).map(f64::from).collect();
        let [a, b] = split_ranges_mut(&mut buf, [&(6..8), &(1..3)]);
        assert_eq!(a, &[6.0, 7.0]);
        assert_eq!(b, &[1.0, 2.0]);
        a[0] = -1.0;
        assert_eq!(buf[6], -1.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("lstm".parse::<ModelKind>().is_err());
    }
}
