//! Mini-batch training of any [`QuantileModel`] on a [`WindowedDataset`].

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LossKind, ModelError, QuantileModel, Result};
use crate::market_data::WindowedDataset;

/// Update rule applied to the averaged mini-batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    Momentum {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        epsilon: f64,
    },
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_adam_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Maximum L2 norm of the batch gradient.
    pub gradient_clip: Option<f64>,
    /// Draw fresh initial parameters from `seed` before training.
    pub initialize: bool,
    #[serde(skip)]
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::default(),
            gradient_clip: None,
            initialize: true,
            loss: LossKind::Pinball,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if let Some(c) = self.gradient_clip {
            if !(c > 0.0) {
                return Err(ModelError::InvalidConfig(format!("gradient_clip {c} must be positive")));
            }
        }
        match self.optimizer {
            Optimizer::Sgd => {}
            Optimizer::Momentum { momentum } if (0.0..1.0).contains(&momentum) => {}
            Optimizer::Adam { beta1, beta2, epsilon }
                if (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0 => {}
            other => return Err(ModelError::InvalidConfig(format!("invalid optimizer settings {other:?}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Mean training-mode mini-batch loss of each epoch.
    pub loss_history: Vec<f64>,
    /// Eval-mode loss over the whole dataset before the first update.
    pub initial_loss: f64,
    /// Eval-mode loss over the whole dataset after the last update.
    pub final_loss: f64,
}

struct OptimizerState {
    rule: Optimizer,
    lr: f64,
    step: i32,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl OptimizerState {
    fn new(rule: Optimizer, lr: f64, n: usize) -> Self {
        let first = if matches!(rule, Optimizer::Sgd) { Vec::new() } else { vec![0.0; n] };
        let second = if matches!(rule, Optimizer::Adam { .. }) { vec![0.0; n] } else { Vec::new() };
        Self { rule, lr, step: 0, first, second }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let lr = self.lr;
        match self.rule {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Momentum { momentum } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(&mut self.first) {
                    *v = momentum * *v + g;
                    *p -= lr * *v;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.first).zip(&mut self.second) {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                }
            }
        }
    }
}

/// Mean eval-mode loss over every sample of `data`.
pub fn evaluate_loss<M: QuantileModel + ?Sized>(model: &M, data: &WindowedDataset, loss: LossKind) -> Result<f64> {
    model.check_dataset(data)?;
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let levels = model.levels().as_slice();
    let mut dout = vec![0.0; levels.len()];
    let total: f64 = (0..data.num_samples)
        .map(|i| loss.evaluate(&model.forward_sample(data.input(i)), data.target(i)[0], levels, &mut dout))
        .sum();
    Ok(total / data.num_samples as f64)
}

/// Trains `model` in place. Deterministic for a given `config.seed`.
pub fn train<M: QuantileModel + ?Sized>(
    model: &mut M,
    data: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model.check_dataset(data)?;
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(2);

    if config.initialize {
        model.params_mut().initialize(&mut init_rng);
    }
    let initial_loss = evaluate_loss(model, data, config.loss)?;

    let n_params = model.params().len();
    let mut state = OptimizerState::new(config.optimizer, config.learning_rate, n_params);
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..data.num_samples).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            grad.fill(0.0);
            let scale = 1.0 / idx.len() as f64;
            let mut batch_loss = 0.0;
            for &i in idx {
                batch_loss += model.backward_sample(
                    data.input(i),
                    data.target(i)[0],
                    config.loss,
                    Some(&mut dropout_rng),
                    scale,
                    &mut grad,
                );
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !batch_loss.is_finite() || !norm.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, batch, loss: batch_loss * scale, grad_norm: norm });
            }
            if let Some(max) = config.gradient_clip {
                if norm > max {
                    let s = max / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            state.apply(model.params_mut().values_mut(), &grad);
            epoch_total += batch_loss;
        }
        let epoch_loss = epoch_total / data.num_samples as f64;
        debug!("epoch {epoch}: loss {epoch_loss:.6}");
        loss_history.push(epoch_loss);
    }

    let final_loss = evaluate_loss(model, data, config.loss)?;
    if !final_loss.is_finite() {
        return Err(ModelError::NonFiniteLoss {
            epoch: config.epochs,
            batch: 0,
            loss: final_loss,
            grad_norm: f64::NAN,
        });
    }
    Ok(TrainOutcome { loss_history, initial_loss, final_loss })
}
