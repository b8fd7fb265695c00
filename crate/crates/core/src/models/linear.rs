use rand::RngCore;

use super::linalg::{add_assign, matmul, matmul_tn_acc};
use super::params::{Init, ParameterSet};
use super::{LossKind, ModelKind, QuantileLevels, QuantileModel, Result};

/// One linear function of the flattened window per quantile level.
///
/// With `window_in == 0` the model is intercept-only.
#[derive(Debug, Clone)]
pub struct QuantileLinear {
    window_in: usize,
    num_features: usize,
    levels: QuantileLevels,
    params: ParameterSet,
}

impl QuantileLinear {
    pub fn new(window_in: usize, num_features: usize, levels: QuantileLevels) -> Self {
        let inputs = window_in * num_features;
        let q = levels.len();
        let mut params = ParameterSet::new();
        params.add("linear.kernel", &[inputs, q], Init::Glorot { fan_in: inputs, fan_out: q });
        params.add("linear.bias", &[q], Init::Zeros);
        Self { window_in, num_features, levels, params }
    }

    pub fn intercept_only(levels: QuantileLevels) -> Self {
        Self::new(0, 1, levels)
    }

    pub fn with_params(window_in: usize, num_features: usize, levels: QuantileLevels, params: ParameterSet) -> Result<Self> {
        let mut model = Self::new(window_in, num_features, levels);
        model.params.copy_from(&params)?;
        Ok(model)
    }

    pub fn kernel(&self) -> &[f64] {
        &self.params.values()[..self.input_len() * self.levels.len()]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params.values()[self.input_len() * self.levels.len()..]
    }
}

impl QuantileModel for QuantileLinear {
    fn kind(&self) -> ModelKind {
        ModelKind::QuantileLinear
    }

    fn levels(&self) -> &QuantileLevels {
        &self.levels
    }

    fn window_in(&self) -> usize {
        self.window_in
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn params(&self) -> &ParameterSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn forward_sample(&self, input: &[f64]) -> Vec<f64> {
        let q = self.levels.len();
        let mut out = matmul(input, 1, self.input_len(), self.kernel(), q);
        add_assign(&mut out, self.bias());
        out
    }

    fn backward_sample(
        &self,
        input: &[f64],
        target: f64,
        loss: LossKind,
        _dropout: Option<&mut dyn RngCore>,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let q = self.levels.len();
        let out = self.forward_sample(input);
        let mut dout = vec![0.0; q];
        let value = loss.evaluate(&out, target, self.levels.as_slice(), &mut dout);
        dout.iter_mut().for_each(|g| *g *= scale);
        let split = self.input_len() * q;
        let (gk, gb) = grad.split_at_mut(split);
        matmul_tn_acc(input, 1, self.input_len(), &dout, q, gk);
        add_assign(gb, &dout);
        value
    }

    fn activation_pattern(&self, _input: &[f64]) -> Vec<bool> {
        Vec::new()
    }
}
