//! Encoder building blocks with explicit caches for backpropagation.
//!
//! Activations are row-major `(T x d)` buffers: one row per time step.

use rand::{Rng, RngCore};

use super::linalg::{
    add_assign, add_row_bias, col_sums_acc, dot, matmul, matmul_nt, matmul_tn_acc, Matrix,
};
use super::{ModelError, Result};

pub const DEFAULT_LAYER_NORM_EPS: f64 = 1e-5;

/// Normalizes one feature vector: `((x - mean) / sqrt(var + eps)) * gamma + shift`.
pub fn layer_norm(x: &[f64], gamma: &[f64], shift: &[f64], eps: f64) -> Vec<f64> {
    layer_norm_rows(x, x.len(), gamma, shift, eps).0
}

#[derive(Debug, Clone)]
pub(crate) struct LayerNormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

/// Layer norm applied to every row of a `rows x d` buffer.
pub(crate) fn layer_norm_rows(
    x: &[f64],
    d: usize,
    gamma: &[f64],
    shift: &[f64],
    eps: f64,
) -> (Vec<f64>, LayerNormCache) {
    let rows = x.len() / d;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std.push(istd);
        for c in 0..d {
            let h = (row[c] - mean) * istd;
            xhat[r * d + c] = h;
            out[r * d + c] = h * gamma[c] + shift[c];
        }
    }
    (out, LayerNormCache { xhat, inv_std })
}

pub(crate) fn layer_norm_rows_backward(
    dout: &[f64],
    d: usize,
    cache: &LayerNormCache,
    gamma: &[f64],
    dgamma: &mut [f64],
    dshift: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; dout.len()];
    let mut dxhat = vec![0.0; d];
    for (r, &istd) in cache.inv_std.iter().enumerate() {
        let go = &dout[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        for c in 0..d {
            dgamma[c] += go[c] * xh[c];
            dshift[c] += go[c];
            dxhat[c] = go[c] * gamma[c];
        }
        let sum = dxhat.iter().sum::<f64>();
        let sum_xh = dot(&dxhat, xh);
        let n = d as f64;
        for c in 0..d {
            dx[r * d + c] = istd / n * (n * dxhat[c] - sum - xh[c] * sum_xh);
        }
    }
    dx
}

/// Query, key, value and output projections, each `d x d`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights<'a> {
    pub wq: &'a [f64],
    pub wk: &'a [f64],
    pub wv: &'a [f64],
    pub wo: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// `(T x d)` projected output.
    pub output: Matrix,
    /// One `(T x T)` row-stochastic weight matrix per head.
    pub weights: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    input: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// heads x T x T
    probs: Vec<f64>,
    concat: Vec<f64>,
}

/// Scaled dot-product attention over `num_heads` heads of width `d / num_heads`,
/// concatenated and projected by `wo`.
pub fn multi_head_attention(x: &Matrix, w: &AttentionWeights<'_>, num_heads: usize) -> Result<AttentionOutput> {
    let d = x.cols;
    if num_heads == 0 || d % num_heads != 0 {
        return Err(ModelError::DimensionMismatch(format!(
            "model width {d} is not divisible by {num_heads} heads"
        )));
    }
    for (name, m) in [("wq", w.wq), ("wk", w.wk), ("wv", w.wv), ("wo", w.wo)] {
        if m.len() != d * d {
            return Err(ModelError::DimensionMismatch(format!(
                "{name} has {} values, expected {d}x{d}",
                m.len()
            )));
        }
    }
    let (out, cache) = attention_forward(&x.data, x.rows, d, num_heads, w);
    let t = x.rows;
    let weights = cache
        .probs
        .chunks(t * t)
        .map(|p| Matrix { rows: t, cols: t, data: p.to_vec() })
        .collect();
    Ok(AttentionOutput { output: Matrix { rows: t, cols: d, data: out }, weights })
}

pub(crate) fn attention_forward(
    x: &[f64],
    t: usize,
    d: usize,
    heads: usize,
    w: &AttentionWeights<'_>,
) -> (Vec<f64>, AttentionCache) {
    let dk = d / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    let q = matmul(x, t, d, w.wq, d);
    let k = matmul(x, t, d, w.wk, d);
    let v = matmul(x, t, d, w.wv, d);
    let mut probs = vec![0.0; heads * t * t];
    let mut concat = vec![0.0; t * d];
    for h in 0..heads {
        let off = h * dk;
        let p = &mut probs[h * t * t..(h + 1) * t * t];
        for i in 0..t {
            let qi = &q[i * d + off..i * d + off + dk];
            let row = &mut p[i * t..(i + 1) * t];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = dot(qi, &k[j * d + off..j * d + off + dk]) * scale;
            }
            softmax_in_place(row);
            let out = &mut concat[i * d + off..i * d + off + dk];
            for (j, &a) in row.iter().enumerate() {
                for (o, &vv) in out.iter_mut().zip(&v[j * d + off..j * d + off + dk]) {
                    *o += a * vv;
                }
            }
        }
    }
    let out = matmul(&concat, t, d, w.wo, d);
    (out, AttentionCache { input: x.to_vec(), q, k, v, probs, concat })
}

/// Gradients for the four projections, laid out like [`AttentionWeights`].
pub(crate) struct AttentionGrads<'a> {
    pub wq: &'a mut [f64],
    pub wk: &'a mut [f64],
    pub wv: &'a mut [f64],
    pub wo: &'a mut [f64],
}

pub(crate) fn attention_backward(
    dout: &[f64],
    t: usize,
    d: usize,
    heads: usize,
    w: &AttentionWeights<'_>,
    cache: &AttentionCache,
    grads: AttentionGrads<'_>,
) -> Vec<f64> {
    let dk = d / heads;
    let scale = 1.0 / (dk as f64).sqrt();
    matmul_tn_acc(&cache.concat, t, d, dout, d, grads.wo);
    // d concat = dout * woᵀ
    let dconcat = matmul_nt(dout, t, d, w.wo, d);

    let mut dq = vec![0.0; t * d];
    let mut dk_ = vec![0.0; t * d];
    let mut dv = vec![0.0; t * d];
    let mut dp = vec![0.0; t];
    for h in 0..heads {
        let off = h * dk;
        let p = &cache.probs[h * t * t..(h + 1) * t * t];
        for i in 0..t {
            let go = &dconcat[i * d + off..i * d + off + dk];
            let prow = &p[i * t..(i + 1) * t];
            for j in 0..t {
                dp[j] = dot(go, &cache.v[j * d + off..j * d + off + dk]);
                let a = prow[j];
                for (g, &gv) in dv[j * d + off..j * d + off + dk].iter_mut().zip(go) {
                    *g += a * gv;
                }
            }
            let weighted = dot(prow, &dp);
            for j in 0..t {
                let ds = prow[j] * (dp[j] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                for c in 0..dk {
                    dq[i * d + off + c] += ds * cache.k[j * d + off + c];
                    dk_[j * d + off + c] += ds * cache.q[i * d + off + c];
                }
            }
        }
    }
    matmul_tn_acc(&cache.input, t, d, &dq, d, grads.wq);
    matmul_tn_acc(&cache.input, t, d, &dk_, d, grads.wk);
    matmul_tn_acc(&cache.input, t, d, &dv, d, grads.wv);
    let mut dx = matmul_nt(&dq, t, d, w.wq, d);
    add_assign(&mut dx, &matmul_nt(&dk_, t, d, w.wk, d));
    add_assign(&mut dx, &matmul_nt(&dv, t, d, w.wv, d));
    dx
}

/// Max-shifted softmax, so adding a constant to the row changes nothing.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Rows `[t0, t1)` of the output read input rows `[t0 + j - pad, ...)` for tap `j`.
fn conv_tap_range(t: usize, width: usize, j: usize) -> Option<(usize, usize, usize)> {
    let pad = (width - 1) / 2;
    let shift = j as isize - pad as isize;
    let t0 = (-shift).max(0) as usize;
    let t1 = (t as isize - shift).min(t as isize);
    if t1 <= t0 as isize {
        return None;
    }
    let s0 = (t0 as isize + shift) as usize;
    Some((t0, t1 as usize, s0))
}

/// Same-padded 1-D convolution along time, before activation.
/// `kernel` is `(width x c_in x c_out)`.
pub(crate) fn conv1d_same(
    x: &[f64],
    t: usize,
    c_in: usize,
    kernel: &[f64],
    bias: &[f64],
    width: usize,
) -> Vec<f64> {
    let c_out = bias.len();
    let mut out = vec![0.0; t * c_out];
    add_row_bias(&mut out, bias);
    for j in 0..width {
        if let Some((t0, t1, s0)) = conv_tap_range(t, width, j) {
            let rows = t1 - t0;
            let tap = &kernel[j * c_in * c_out..(j + 1) * c_in * c_out];
            let part = matmul(&x[s0 * c_in..(s0 + rows) * c_in], rows, c_in, tap, c_out);
            add_assign(&mut out[t0 * c_out..t1 * c_out], &part);
        }
    }
    out
}

pub(crate) fn conv1d_same_backward(
    dout: &[f64],
    x: &[f64],
    t: usize,
    c_in: usize,
    kernel: &[f64],
    width: usize,
    dkernel: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let c_out = dbias.len();
    col_sums_acc(dout, c_out, dbias);
    let mut dx = vec![0.0; t * c_in];
    for j in 0..width {
        if let Some((t0, t1, s0)) = conv_tap_range(t, width, j) {
            let rows = t1 - t0;
            let xs = &x[s0 * c_in..(s0 + rows) * c_in];
            let go = &dout[t0 * c_out..t1 * c_out];
            let tap = j * c_in * c_out..(j + 1) * c_in * c_out;
            matmul_tn_acc(xs, rows, c_in, go, c_out, &mut dkernel[tap.clone()]);
            let part = matmul_nt(go, rows, c_out, &kernel[tap], c_in);
            add_assign(&mut dx[s0 * c_in..(s0 + rows) * c_in], &part);
        }
    }
    dx
}

/// `ReLU(Conv1D(x))` with same padding. `kernel` is `(width x d_in x d_out)`.
pub fn conv_feedforward(x: &Matrix, kernel: &[f64], bias: &[f64], width: usize) -> Result<Matrix> {
    let d_out = bias.len();
    if width == 0 || width > x.rows {
        return Err(ModelError::DimensionMismatch(format!(
            "kernel width {width} must be in 1..={}",
            x.rows
        )));
    }
    if kernel.len() != width * x.cols * d_out {
        return Err(ModelError::DimensionMismatch(format!(
            "kernel has {} values, expected {width}x{}x{d_out}",
            kernel.len(),
            x.cols
        )));
    }
    let mut data = conv1d_same(&x.data, x.rows, x.cols, kernel, bias, width);
    relu_in_place(&mut data);
    Ok(Matrix { rows: x.rows, cols: d_out, data })
}

pub(crate) fn relu_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes `grad` where the pre-activation was not positive.
pub(crate) fn relu_backward_in_place(grad: &mut [f64], pre: &[f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Mean over the time axis.
pub fn global_average_pool(x: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; x.cols];
    col_sums_acc(&x.data, x.cols, &mut out);
    let n = x.rows as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Inverted-dropout scale factors (0 or `1 / (1 - rate)`), or `None` when disabled.
pub(crate) fn dropout_mask(len: usize, rate: f64, rng: Option<&mut dyn RngCore>) -> Option<Vec<f64>> {
    let rng = rng?;
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - rate);
    Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn layer_norm_cases() {
        assert_eq!(layer_norm(&[1.0, 1.0, 1.0], &[1.0; 3], &[0.0; 3], 1e-5), vec![0.0; 3]);
        let y = layer_norm(&[-1.0, 1.0], &[1.0; 2], &[0.0; 2], 1e-15);
        assert!((y[0] + 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
        let y = layer_norm(&[3.0, -7.0, 2.0], &[0.0; 3], &[0.5, 1.5, 2.5], 1e-5);
        assert_eq!(y, vec![0.5, 1.5, 2.5]);
    }

    #[test]
    fn attention_single_step_is_value_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 4;
        let (wq, wk, wv, wo) = (random(16, &mut rng), random(16, &mut rng), random(16, &mut rng), random(16, &mut rng));
        let x = Matrix::from_vec(1, d, random(d, &mut rng)).unwrap();
        let w = AttentionWeights { wq: &wq, wk: &wk, wv: &wv, wo: &wo };
        let out = multi_head_attention(&x, &w, 2).unwrap();
        for p in &out.weights {
            assert_eq!(p.data, vec![1.0]);
        }
        let v = matmul(&x.data, 1, d, &wv, d);
        let expected = matmul(&v, 1, d, &wo, d);
        for (a, b) in out.output.data.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_query_key_gives_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (t, d) = (5, 4);
        let zeros = vec![0.0; d * d];
        let (wv, wo) = (random(d * d, &mut rng), random(d * d, &mut rng));
        let x = Matrix::from_vec(t, d, random(t * d, &mut rng)).unwrap();
        let w = AttentionWeights { wq: &zeros, wk: &zeros, wv: &wv, wo: &wo };
        let out = multi_head_attention(&x, &w, 2).unwrap();
        for p in &out.weights {
            assert!(p.data.iter().all(|&a| (a - 0.2).abs() < 1e-15));
        }
        let v = Matrix::from_vec(t, d, matmul(&x.data, t, d, &wv, d)).unwrap();
        let mean_v = global_average_pool(&v);
        let expected = matmul(&mean_v, 1, d, &wo, d);
        for r in 0..t {
            for c in 0..d {
                assert!((out.output.get(r, c) - expected[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut row = random(7, &mut rng).iter().map(|v| v * 30.0).collect::<Vec<_>>();
        let mut shifted: Vec<f64> = row.iter().map(|v| v + 123.0).collect();
        softmax_in_place(&mut row);
        softmax_in_place(&mut shifted);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in row.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn attention_rejects_indivisible_width() {
        let x = Matrix::zeros(3, 5);
        let w = vec![0.0; 25];
        let weights = AttentionWeights { wq: &w, wk: &w, wv: &w, wo: &w };
        assert!(matches!(multi_head_attention(&x, &weights, 2), Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn conv_identity_kernel_is_relu() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![-0.5, 3.0]]).unwrap();
        // width 1, identity map 2 -> 2
        let kernel = [1.0, 0.0, 0.0, 1.0];
        let y = conv_feedforward(&x, &kernel, &[0.0, 0.0], 1).unwrap();
        assert_eq!(y.data, vec![1.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn conv_negative_input_floors_to_zero() {
        let x = Matrix::from_vec(4, 1, vec![-1.0, -2.0, -0.1, -5.0]).unwrap();
        let y = conv_feedforward(&x, &[1.0, 1.0, 1.0], &[0.0], 3).unwrap();
        assert_eq!(y.data, vec![0.0; 4]);
    }

    #[test]
    fn conv_same_padding_keeps_length() {
        let x = Matrix::from_vec(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        // taps (prev, current, next)
        let y = conv_feedforward(&x, &[1.0, 10.0, 100.0], &[0.0], 3).unwrap();
        assert_eq!(y.rows, 5);
        assert_eq!(y.data, vec![210.0, 321.0, 432.0, 543.0, 54.0]);
        assert!(conv_feedforward(&x, &[1.0; 6], &[0.0], 6).is_err());
    }

    #[test]
    fn pooling_cases() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(global_average_pool(&x), vec![2.0, 3.0]);
        let one = Matrix::from_rows(&[vec![7.0, -1.0]]).unwrap();
        assert_eq!(global_average_pool(&one), vec![7.0, -1.0]);
        let same = Matrix::from_rows(&vec![vec![0.25, 9.0]; 6]).unwrap();
        assert_eq!(global_average_pool(&same), vec![0.25, 9.0]);
    }

    // Finite-difference checks of each backward routine against a random linear functional.
    fn fd_check(f: &dyn Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) {
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += h;
            let mut xm = x.to_vec();
            xm[i] -= h;
            let num = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((num - analytic[i]).abs() < 1e-7 * (1.0 + num.abs()), "i={i}: {num} vs {}", analytic[i]);
        }
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (t, d) = (3, 4);
        let x = random(t * d, &mut rng);
        let gamma = random(d, &mut rng);
        let shift = random(d, &mut rng);
        let probe = random(t * d, &mut rng);
        let f = |x: &[f64]| dot(&layer_norm_rows(x, d, &gamma, &shift, 1e-5).0, &probe);
        let (_, cache) = layer_norm_rows(&x, d, &gamma, &shift, 1e-5);
        let (mut dg, mut ds) = (vec![0.0; d], vec![0.0; d]);
        let dx = layer_norm_rows_backward(&probe, d, &cache, &gamma, &mut dg, &mut ds);
        fd_check(&f, &x, &dx);
        let fg = |g: &[f64]| dot(&layer_norm_rows(&x, d, g, &shift, 1e-5).0, &probe);
        fd_check(&fg, &gamma, &dg);
    }

    #[test]
    fn attention_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (t, d, heads) = (4, 6, 3);
        let x = random(t * d, &mut rng);
        let ws: Vec<Vec<f64>> = (0..4).map(|_| random(d * d, &mut rng)).collect();
        let probe = random(t * d, &mut rng);
        let run = |x: &[f64], ws: &[Vec<f64>]| {
            let w = AttentionWeights { wq: &ws[0], wk: &ws[1], wv: &ws[2], wo: &ws[3] };
            dot(&attention_forward(x, t, d, heads, &w).0, &probe)
        };
        let w = AttentionWeights { wq: &ws[0], wk: &ws[1], wv: &ws[2], wo: &ws[3] };
        let (_, cache) = attention_forward(&x, t, d, heads, &w);
        let mut g: Vec<Vec<f64>> = vec![vec![0.0; d * d]; 4];
        let (g0, rest) = g.split_at_mut(1);
        let (g1, rest) = rest.split_at_mut(1);
        let (g2, g3) = rest.split_at_mut(1);
        let dx = attention_backward(
            &probe,
            t,
            d,
            heads,
            &w,
            &cache,
            AttentionGrads { wq: &mut g0[0], wk: &mut g1[0], wv: &mut g2[0], wo: &mut g3[0] },
        );
        fd_check(&|x| run(x, &ws), &x, &dx);
        for which in 0..4 {
            let f = |wv: &[f64]| {
                let mut ws2 = ws.clone();
                ws2[which] = wv.to_vec();
                run(&x, &ws2)
            };
            fd_check(&f, &ws[which], &g[which]);
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for width in [1, 2, 3, 4] {
            let (t, c_in, c_out) = (5, 3, 2);
            let x = random(t * c_in, &mut rng);
            let kernel = random(width * c_in * c_out, &mut rng);
            let bias = random(c_out, &mut rng);
            let probe = random(t * c_out, &mut rng);
            let (mut dk, mut db) = (vec![0.0; kernel.len()], vec![0.0; c_out]);
            let dx = conv1d_same_backward(&probe, &x, t, c_in, &kernel, width, &mut dk, &mut db);
            fd_check(&|x| dot(&conv1d_same(x, t, c_in, &kernel, &bias, width), &probe), &x, &dx);
            fd_check(&|k| dot(&conv1d_same(&x, t, c_in, k, &bias, width), &probe), &kernel, &dk);
            fd_check(&|b| dot(&conv1d_same(&x, t, c_in, &kernel, b, width), &probe), &bias, &db);
        }
    }
}
