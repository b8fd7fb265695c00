use std::ops::Range;

use rand::RngCore;

use super::layers::{relu_backward_in_place, relu_in_place};
use super::linalg::{add_assign, matmul, matmul_nt, matmul_tn_acc};
use super::params::{Init, ParameterSet};
use super::{split_ranges_mut, LossKind, ModelKind, QuantileLevels, QuantileModel, Result};

/// Feed-forward baseline: flattened window -> ReLU hidden layer -> one output per level.
#[derive(Debug, Clone)]
pub struct QuantileMlp {
    window_in: usize,
    num_features: usize,
    hidden: usize,
    levels: QuantileLevels,
    params: ParameterSet,
    hidden_kernel: Range<usize>,
    hidden_bias: Range<usize>,
    output_kernel: Range<usize>,
    output_bias: Range<usize>,
}

impl QuantileMlp {
    pub fn new(window_in: usize, num_features: usize, hidden: usize, levels: QuantileLevels) -> Self {
        let inputs = window_in * num_features;
        let q = levels.len();
        let mut params = ParameterSet::new();
        let hidden_kernel = params.add("hidden.kernel", &[inputs, hidden], Init::Glorot { fan_in: inputs, fan_out: hidden });
        let hidden_bias = params.add("hidden.bias", &[hidden], Init::Zeros);
        let output_kernel = params.add("output.kernel", &[hidden, q], Init::Glorot { fan_in: hidden, fan_out: q });
        let output_bias = params.add("output.bias", &[q], Init::Zeros);
        Self {
            window_in,
            num_features,
            hidden,
            levels,
            params,
            hidden_kernel,
            hidden_bias,
            output_kernel,
            output_bias,
        }
    }

    pub fn with_params(
        window_in: usize,
        num_features: usize,
        hidden: usize,
        levels: QuantileLevels,
        params: ParameterSet,
    ) -> Result<Self> {
        let mut model = Self::new(window_in, num_features, hidden, levels);
        model.params.copy_from(&params)?;
        Ok(model)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    fn hidden_pre(&self, input: &[f64]) -> Vec<f64> {
        let p = self.params.values();
        let mut z = matmul(input, 1, self.input_len(), &p[self.hidden_kernel.clone()], self.hidden);
        add_assign(&mut z, &p[self.hidden_bias.clone()]);
        z
    }

    fn head(&self, h: &[f64]) -> Vec<f64> {
        let p = self.params.values();
        let mut out = matmul(h, 1, self.hidden, &p[self.output_kernel.clone()], self.levels.len());
        add_assign(&mut out, &p[self.output_bias.clone()]);
        out
    }
}

impl QuantileModel for QuantileMlp {
    fn kind(&self) -> ModelKind {
        ModelKind::QuantileMlp
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
        let mut h = self.hidden_pre(input);
        relu_in_place(&mut h);
        self.head(&h)
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
        let z = self.hidden_pre(input);
        let mut h = z.clone();
        relu_in_place(&mut h);
        let out = self.head(&h);
        let mut dout = vec![0.0; q];
        let value = loss.evaluate(&out, target, self.levels.as_slice(), &mut dout);
        dout.iter_mut().for_each(|g| *g *= scale);

        let [g_hk, g_hb, g_ok, g_ob] = split_ranges_mut(
            grad,
            [&self.hidden_kernel, &self.hidden_bias, &self.output_kernel, &self.output_bias],
        );
        matmul_tn_acc(&h, 1, self.hidden, &dout, q, g_ok);
        add_assign(g_ob, &dout);
        let mut dz = matmul_nt(&dout, 1, q, &self.params.values()[self.output_kernel.clone()], self.hidden);
        relu_backward_in_place(&mut dz, &z);
        matmul_tn_acc(input, 1, self.input_len(), &dz, self.hidden, g_hk);
        add_assign(g_hb, &dz);
        value
    }

    fn activation_pattern(&self, input: &[f64]) -> Vec<bool> {
        self.hidden_pre(input).iter().map(|&v| v > 0.0).collect()
    }
}
