//! Attention encoder stack with a pooled dense head producing one output per quantile level.
//!
//! Per sample the forward pass is:
//!
//! ```text
//! x0 = X W_in + b_in                              (T x F) -> (T x d)
//! repeat num_blocks:
//!     y1 = x + Dropout(MHA(LayerNorm(x)))
//!     y2 = y1 + Conv1x1(ReLU(Conv_k(LayerNorm(y1))))
//! p  = mean over time of the last block output     (d)
//! h1 = ReLU(p W1 + b1), h2 = ReLU(h1 W2 + b2)
//! q  = h2 W_out + b_out                            (Q)
//! ```

use std::ops::Range;

use rand::RngCore;

use super::layers::{
    attention_backward, attention_forward, conv1d_same, conv1d_same_backward, dropout_mask, layer_norm_rows,
    layer_norm_rows_backward, relu_backward_in_place, relu_in_place, AttentionCache, AttentionGrads,
    AttentionWeights, LayerNormCache, DEFAULT_LAYER_NORM_EPS,
};
use super::linalg::{add_assign, add_row_bias, col_sums_acc, matmul, matmul_nt, matmul_tn_acc, Matrix};
use super::params::{Init, ParameterSet};
use super::{
    split_ranges_mut, LossKind, ModelError, ModelKind, QuantileForecast, QuantileLevels, QuantileModel, Result,
};

/// Architecture of the encoder model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub window_in: usize,
    pub num_features: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub key_dim: usize,
    pub conv_channels: usize,
    pub conv_kernel: usize,
    pub dense_units: [usize; 2],
    pub dropout_rate: f64,
    pub layer_norm_eps: f64,
    pub levels: QuantileLevels,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            window_in: 5,
            num_features: 1,
            num_blocks: 4,
            num_heads: 2,
            key_dim: 8,
            conv_channels: 16,
            conv_kernel: 3,
            dense_units: [32, 16],
            dropout_rate: 0.1,
            layer_norm_eps: DEFAULT_LAYER_NORM_EPS,
            levels: QuantileLevels::default(),
        }
    }
}

impl ModelSpec {
    /// Width of the residual stream.
    pub fn model_dim(&self) -> usize {
        self.num_heads * self.key_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("window_in", self.window_in),
            ("num_features", self.num_features),
            ("num_blocks", self.num_blocks),
            ("num_heads", self.num_heads),
            ("key_dim", self.key_dim),
            ("conv_channels", self.conv_channels),
            ("conv_kernel", self.conv_kernel),
            ("dense_units[0]", self.dense_units[0]),
            ("dense_units[1]", self.dense_units[1]),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidSpec(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::InvalidSpec(format!("dropout_rate {} not in [0,1)", self.dropout_rate)));
        }
        if self.conv_kernel > self.window_in {
            return Err(ModelError::InvalidSpec(format!(
                "conv_kernel {} exceeds window_in {}",
                self.conv_kernel, self.window_in
            )));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(ModelError::InvalidSpec("layer_norm_eps must be positive".into()));
        }
        Ok(())
    }
}

fn reborrow<'a>(rng: &'a mut Option<&mut dyn RngCore>) -> Option<&'a mut dyn RngCore> {
    match rng {
        Some(r) => Some(&mut **r),
        None => None,
    }
}

/// Training or inference behaviour of dropout.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl<'a> Mode<'a> {
    fn rng(&mut self) -> Option<&mut dyn RngCore> {
        match self {
            Mode::Eval => None,
            Mode::Train(rng) => Some(&mut **rng),
        }
    }
}

#[derive(Debug, Clone)]
struct BlockLayout {
    ln1_gamma: Range<usize>,
    ln1_shift: Range<usize>,
    wq: Range<usize>,
    wk: Range<usize>,
    wv: Range<usize>,
    wo: Range<usize>,
    ln2_gamma: Range<usize>,
    ln2_shift: Range<usize>,
    conv1_kernel: Range<usize>,
    conv1_bias: Range<usize>,
    conv2_kernel: Range<usize>,
    conv2_bias: Range<usize>,
}

#[derive(Debug, Clone)]
struct Layout {
    input_kernel: Range<usize>,
    input_bias: Range<usize>,
    blocks: Vec<BlockLayout>,
    dense1_kernel: Range<usize>,
    dense1_bias: Range<usize>,
    dense2_kernel: Range<usize>,
    dense2_bias: Range<usize>,
    output_kernel: Range<usize>,
    output_bias: Range<usize>,
}

fn build_layout(spec: &ModelSpec) -> (Layout, ParameterSet) {
    let d = spec.model_dim();
    let f = spec.num_features;
    let (c, k) = (spec.conv_channels, spec.conv_kernel);
    let [u1, u2] = spec.dense_units;
    let q = spec.levels.len();
    let glorot = |fan_in, fan_out| Init::Glorot { fan_in, fan_out };

    let mut p = ParameterSet::new();
    let input_kernel = p.add("input.kernel", &[f, d], glorot(f, d));
    let input_bias = p.add("input.bias", &[d], Init::Zeros);
    let blocks = (0..spec.num_blocks)
        .map(|b| {
            let n = |s: &str| format!("block{b}.{s}");
            BlockLayout {
                ln1_gamma: p.add(n("ln1.gamma"), &[d], Init::Ones),
                ln1_shift: p.add(n("ln1.shift"), &[d], Init::Zeros),
                wq: p.add(n("attn.query"), &[d, d], glorot(d, d)),
                wk: p.add(n("attn.key"), &[d, d], glorot(d, d)),
                wv: p.add(n("attn.value"), &[d, d], glorot(d, d)),
                wo: p.add(n("attn.output"), &[d, d], glorot(d, d)),
                ln2_gamma: p.add(n("ln2.gamma"), &[d], Init::Ones),
                ln2_shift: p.add(n("ln2.shift"), &[d], Init::Zeros),
                conv1_kernel: p.add(n("conv1.kernel"), &[k, d, c], glorot(k * d, k * c)),
                conv1_bias: p.add(n("conv1.bias"), &[c], Init::Zeros),
                conv2_kernel: p.add(n("conv2.kernel"), &[c, d], glorot(c, d)),
                conv2_bias: p.add(n("conv2.bias"), &[d], Init::Zeros),
            }
        })
        .collect();
    let layout = Layout {
        input_kernel,
        input_bias,
        blocks,
        dense1_kernel: p.add("dense1.kernel", &[d, u1], glorot(d, u1)),
        dense1_bias: p.add("dense1.bias", &[u1], Init::Zeros),
        dense2_kernel: p.add("dense2.kernel", &[u1, u2], glorot(u1, u2)),
        dense2_bias: p.add("dense2.bias", &[u2], Init::Zeros),
        output_kernel: p.add("output.kernel", &[u2, q], glorot(u2, q)),
        output_bias: p.add("output.bias", &[q], Init::Zeros),
    };
    (layout, p)
}

struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    mask: Option<Vec<f64>>,
    ln2: LayerNormCache,
    n2: Vec<f64>,
    conv_pre: Vec<f64>,
    conv_act: Vec<f64>,
}

struct SampleCache {
    blocks: Vec<BlockCache>,
    pooled: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
}

/// The encoder quantile model: spec, parameter layout and weights.
#[derive(Debug, Clone)]
pub struct QuantileTransformer {
    spec: ModelSpec,
    layout: Layout,
    params: ParameterSet,
}

impl QuantileTransformer {
    /// Builds the model with all parameters zero; call [`ParameterSet::initialize`] to randomize.
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let (layout, params) = build_layout(&spec);
        Ok(Self { spec, layout, params })
    }

    pub fn with_params(spec: ModelSpec, params: ParameterSet) -> Result<Self> {
        let mut model = Self::new(spec)?;
        model.params.copy_from(&params)?;
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn attention_weights<'a>(&self, p: &'a [f64], b: &BlockLayout) -> AttentionWeights<'a> {
        AttentionWeights {
            wq: &p[b.wq.clone()],
            wk: &p[b.wk.clone()],
            wv: &p[b.wv.clone()],
            wo: &p[b.wo.clone()],
        }
    }

    fn block_forward(&self, b: &BlockLayout, x: &[f64], rng: Option<&mut dyn RngCore>) -> (Vec<f64>, BlockCache) {
        let p = self.params.values();
        let s = &self.spec;
        let d = s.model_dim();
        let t = x.len() / d;
        let eps = s.layer_norm_eps;

        let (n1, ln1) = layer_norm_rows(x, d, &p[b.ln1_gamma.clone()], &p[b.ln1_shift.clone()], eps);
        let (mut attn, attn_cache) = attention_forward(&n1, t, d, s.num_heads, &self.attention_weights(p, b));
        let mask = dropout_mask(t * d, s.dropout_rate, rng);
        if let Some(m) = &mask {
            attn.iter_mut().zip(m).for_each(|(a, m)| *a *= m);
        }
        let mut y = x.to_vec();
        add_assign(&mut y, &attn);

        let (n2, ln2) = layer_norm_rows(&y, d, &p[b.ln2_gamma.clone()], &p[b.ln2_shift.clone()], eps);
        let conv_pre = conv1d_same(
            &n2,
            t,
            d,
            &p[b.conv1_kernel.clone()],
            &p[b.conv1_bias.clone()],
            s.conv_kernel,
        );
        let mut conv_act = conv_pre.clone();
        relu_in_place(&mut conv_act);
        let mut back = matmul(&conv_act, t, s.conv_channels, &p[b.conv2_kernel.clone()], d);
        add_row_bias(&mut back, &p[b.conv2_bias.clone()]);
        add_assign(&mut y, &back);

        let cache = BlockCache { ln1, attn: attn_cache, mask, ln2, n2, conv_pre, conv_act };
        (y, cache)
    }

    fn block_backward(&self, b: &BlockLayout, cache: &BlockCache, dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let p = self.params.values();
        let s = &self.spec;
        let d = s.model_dim();
        let c = s.conv_channels;
        let t = dy.len() / d;

        let [g_conv2_k, g_conv2_b, g_conv1_k, g_conv1_b, g_ln2_g, g_ln2_s] = split_ranges_mut(
            grad,
            [&b.conv2_kernel, &b.conv2_bias, &b.conv1_kernel, &b.conv1_bias, &b.ln2_gamma, &b.ln2_shift],
        );
        matmul_tn_acc(&cache.conv_act, t, c, dy, d, g_conv2_k);
        col_sums_acc(dy, d, g_conv2_b);
        let mut dact = matmul_nt(dy, t, d, &p[b.conv2_kernel.clone()], c);
        relu_backward_in_place(&mut dact, &cache.conv_pre);
        let dn2 = conv1d_same_backward(
            &dact,
            &cache.n2,
            t,
            d,
            &p[b.conv1_kernel.clone()],
            s.conv_kernel,
            g_conv1_k,
            g_conv1_b,
        );
        let mut dy1 = layer_norm_rows_backward(&dn2, d, &cache.ln2, &p[b.ln2_gamma.clone()], g_ln2_g, g_ln2_s);
        add_assign(&mut dy1, dy);

        let mut dattn = dy1.clone();
        if let Some(m) = &cache.mask {
            dattn.iter_mut().zip(m).for_each(|(g, m)| *g *= m);
        }
        let [g_wq, g_wk, g_wv, g_wo, g_ln1_g, g_ln1_s] =
            split_ranges_mut(grad, [&b.wq, &b.wk, &b.wv, &b.wo, &b.ln1_gamma, &b.ln1_shift]);
        let dn1 = attention_backward(
            &dattn,
            t,
            d,
            s.num_heads,
            &self.attention_weights(p, b),
            &cache.attn,
            AttentionGrads { wq: g_wq, wk: g_wk, wv: g_wv, wo: g_wo },
        );
        let dx_ln = layer_norm_rows_backward(&dn1, d, &cache.ln1, &p[b.ln1_gamma.clone()], g_ln1_g, g_ln1_s);
        add_assign(&mut dy1, &dx_ln);
        dy1
    }

    fn forward_cached(&self, input: &[f64], mut rng: Option<&mut dyn RngCore>) -> (Vec<f64>, SampleCache) {
        let p = self.params.values();
        let s = &self.spec;
        let (t, f, d) = (s.window_in, s.num_features, s.model_dim());
        let l = &self.layout;

        let mut x = matmul(input, t, f, &p[l.input_kernel.clone()], d);
        add_row_bias(&mut x, &p[l.input_bias.clone()]);
        let mut blocks = Vec::with_capacity(l.blocks.len());
        for b in &l.blocks {
            let (y, cache) = self.block_forward(b, &x, reborrow(&mut rng));
            blocks.push(cache);
            x = y;
        }

        let mut pooled = vec![0.0; d];
        col_sums_acc(&x, d, &mut pooled);
        pooled.iter_mut().for_each(|v| *v /= t as f64);

        let [u1, u2] = s.dense_units;
        let mut z1 = matmul(&pooled, 1, d, &p[l.dense1_kernel.clone()], u1);
        add_assign(&mut z1, &p[l.dense1_bias.clone()]);
        let mut h1 = z1.clone();
        relu_in_place(&mut h1);
        let mut z2 = matmul(&h1, 1, u1, &p[l.dense2_kernel.clone()], u2);
        add_assign(&mut z2, &p[l.dense2_bias.clone()]);
        let mut h2 = z2.clone();
        relu_in_place(&mut h2);
        let mut out = matmul(&h2, 1, u2, &p[l.output_kernel.clone()], s.levels.len());
        add_assign(&mut out, &p[l.output_bias.clone()]);

        (out, SampleCache { blocks, pooled, z1, h1, z2, h2 })
    }

    fn backward_cached(&self, input: &[f64], cache: &SampleCache, dout: &[f64], grad: &mut [f64]) {
        let p = self.params.values();
        let s = &self.spec;
        let (t, f, d) = (s.window_in, s.num_features, s.model_dim());
        let [u1, u2] = s.dense_units;
        let q = s.levels.len();
        let l = &self.layout;

        let [g_out_k, g_out_b, g_d2_k, g_d2_b, g_d1_k, g_d1_b] = split_ranges_mut(
            grad,
            [&l.output_kernel, &l.output_bias, &l.dense2_kernel, &l.dense2_bias, &l.dense1_kernel, &l.dense1_bias],
        );
        matmul_tn_acc(&cache.h2, 1, u2, dout, q, g_out_k);
        add_assign(g_out_b, dout);
        let mut dz2 = matmul_nt(dout, 1, q, &p[l.output_kernel.clone()], u2);
        relu_backward_in_place(&mut dz2, &cache.z2);
        matmul_tn_acc(&cache.h1, 1, u1, &dz2, u2, g_d2_k);
        add_assign(g_d2_b, &dz2);
        let mut dz1 = matmul_nt(&dz2, 1, u2, &p[l.dense2_kernel.clone()], u1);
        relu_backward_in_place(&mut dz1, &cache.z1);
        matmul_tn_acc(&cache.pooled, 1, d, &dz1, u1, g_d1_k);
        add_assign(g_d1_b, &dz1);
        let dpooled = matmul_nt(&dz1, 1, u1, &p[l.dense1_kernel.clone()], d);

        let mut dx: Vec<f64> = (0..t).flat_map(|_| dpooled.iter().map(|v| v / t as f64)).collect();
        for (b, bc) in l.blocks.iter().zip(&cache.blocks).rev() {
            dx = self.block_backward(b, bc, &dx, grad);
        }

        let [g_in_k, g_in_b] = split_ranges_mut(grad, [&l.input_kernel, &l.input_bias]);
        matmul_tn_acc(input, t, f, &dx, d, g_in_k);
        col_sums_acc(&dx, d, g_in_b);
    }
}

impl QuantileModel for QuantileTransformer {
    fn kind(&self) -> ModelKind {
        ModelKind::FutureQuant
    }

    fn levels(&self) -> &QuantileLevels {
        &self.spec.levels
    }

    fn window_in(&self) -> usize {
        self.spec.window_in
    }

    fn num_features(&self) -> usize {
        self.spec.num_features
    }

    fn params(&self) -> &ParameterSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn forward_sample(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input, None).0
    }

    fn backward_sample(
        &self,
        input: &[f64],
        target: f64,
        loss: LossKind,
        dropout: Option<&mut dyn RngCore>,
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let (out, cache) = self.forward_cached(input, dropout);
        let mut dout = vec![0.0; out.len()];
        let value = loss.evaluate(&out, target, self.spec.levels.as_slice(), &mut dout);
        dout.iter_mut().for_each(|g| *g *= scale);
        self.backward_cached(input, &cache, &dout, grad);
        value
    }

    fn activation_pattern(&self, input: &[f64]) -> Vec<bool> {
        let (_, cache) = self.forward_cached(input, None);
        cache
            .blocks
            .iter()
            .flat_map(|b| b.conv_pre.iter())
            .chain(&cache.z1)
            .chain(&cache.z2)
            .map(|&v| v > 0.0)
            .collect()
    }
}

/// One encoder block of `model` applied to a `(T x d)` input.
pub fn encoder_block(model: &QuantileTransformer, block: usize, x: &Matrix, mut mode: Mode<'_>) -> Result<Matrix> {
    let d = model.spec.model_dim();
    let b = model
        .layout
        .blocks
        .get(block)
        .ok_or_else(|| ModelError::InvalidSpec(format!("block {block} out of range")))?;
    if x.cols != d || x.rows < model.spec.conv_kernel {
        return Err(ModelError::DimensionMismatch(format!(
            "block input is {}x{}, expected T>={} by {d}",
            x.rows, x.cols, model.spec.conv_kernel
        )));
    }
    let (y, _) = model.block_forward(b, &x.data, mode.rng());
    Ok(Matrix { rows: x.rows, cols: d, data: y })
}

/// Forecast for `n` windows stored row-major in `inputs` (N x T x F), in normalized units.
pub fn forward(model: &QuantileTransformer, inputs: &[f64], n: usize, mut mode: Mode<'_>) -> Result<QuantileForecast> {
    let len = model.input_len();
    if inputs.len() != n * len {
        return Err(ModelError::ShapeMismatch(format!(
            "{} input values for {n} windows of {}x{}",
            inputs.len(),
            model.spec.window_in,
            model.spec.num_features
        )));
    }
    let mut values = Vec::with_capacity(n * model.spec.levels.len());
    for window in inputs.chunks(len.max(1)).take(n) {
        values.extend(model.forward_cached(window, mode.rng()).0);
    }
    QuantileForecast::new(model.spec.levels.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_spec() -> ModelSpec {
        ModelSpec {
            num_blocks: 2,
            key_dim: 3,
            conv_channels: 4,
            dense_units: [6, 5],
            ..ModelSpec::default()
        }
    }

    fn random_model(spec: ModelSpec, seed: u64) -> QuantileTransformer {
        let mut m = QuantileTransformer::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.params_mut().initialize(&mut rng);
        // non-trivial norms and biases
        for v in m.params_mut().values_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
        m
    }

    fn random_inputs(n: usize, len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * len).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    #[test]
    fn output_shape_is_samples_by_levels() {
        let m = random_model(ModelSpec::default(), 1);
        let f = forward(&m, &random_inputs(7, 5, 2), 7, Mode::Eval).unwrap();
        assert_eq!((f.num_samples(), f.levels.len()), (7, 5));
        assert!(forward(&m, &random_inputs(7, 5, 2), 6, Mode::Eval).is_err());
    }

    #[test]
    fn zero_parameters_collapse_to_output_bias() {
        let mut m = QuantileTransformer::new(ModelSpec::default()).unwrap();
        let bias = [0.1, 0.2, 0.3, 0.4, 0.5];
        m.params_mut().get_mut("output.bias").unwrap().copy_from_slice(&bias);
        let f = forward(&m, &random_inputs(4, 5, 3), 4, Mode::Eval).unwrap();
        for row in f.rows() {
            assert_eq!(row, &bias);
        }
    }

    #[test]
    fn zero_weight_block_is_identity() {
        let m = QuantileTransformer::new(ModelSpec::default()).unwrap();
        let x = Matrix::from_vec(5, 16, random_inputs(1, 80, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [Mode::Eval, Mode::Train(&mut rng)] {
            assert_eq!(encoder_block(&m, 0, &x, mode).unwrap(), x);
        }
    }

    #[test]
    fn dropout_free_train_mode_equals_eval() {
        let spec = ModelSpec { dropout_rate: 0.0, ..small_spec() };
        let m = random_model(spec, 5);
        let x = Matrix::from_vec(5, 6, random_inputs(1, 30, 6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = encoder_block(&m, 1, &x, Mode::Eval).unwrap();
        let b = encoder_block(&m, 1, &x, Mode::Train(&mut rng)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn block_preserves_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..5 {
            let spec = ModelSpec {
                window_in: rng.random_range(3..9),
                num_heads: rng.random_range(1..4),
                key_dim: rng.random_range(1..5),
                conv_kernel: rng.random_range(1..4),
                ..small_spec()
            };
            let m = random_model(spec.clone(), seed);
            let d = spec.model_dim();
            let x = Matrix::from_vec(spec.window_in, d, random_inputs(1, spec.window_in * d, seed)).unwrap();
            let y = encoder_block(&m, 0, &x, Mode::Eval).unwrap();
            assert_eq!((y.rows, y.cols), (x.rows, x.cols));
        }
    }

    #[test]
    fn samples_are_independent() {
        let m = random_model(small_spec(), 11);
        let inputs = random_inputs(4, 5, 12);
        let f = forward(&m, &inputs, 4, Mode::Eval).unwrap();
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<f64> = perm.iter().flat_map(|&i| inputs[i * 5..(i + 1) * 5].to_vec()).collect();
        let g = forward(&m, &permuted, 4, Mode::Eval).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(g.row(k), f.row(i));
        }
    }

    #[test]
    fn zero_query_key_pointwise_model_ignores_time_order() {
        let spec = ModelSpec { conv_kernel: 1, ..small_spec() };
        let mut m = random_model(spec, 13);
        for b in 0..2 {
            for name in ["attn.query", "attn.key"] {
                m.params_mut().get_mut(&format!("block{b}.{name}")).unwrap().fill(0.0);
            }
        }
        let x = random_inputs(1, 5, 14);
        let reversed: Vec<f64> = x.iter().rev().copied().collect();
        let a = m.forward_sample(&x);
        let b = m.forward_sample(&reversed);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(QuantileTransformer::new(ModelSpec { num_blocks: 0, ..ModelSpec::default() }).is_err());
        assert!(QuantileTransformer::new(ModelSpec { dropout_rate: 1.0, ..ModelSpec::default() }).is_err());
        assert!(QuantileTransformer::new(ModelSpec { conv_kernel: 6, ..ModelSpec::default() }).is_err());
    }
}
