//! Single-layer LSTM with explicit step caches for backpropagation through time.
//!
//! Gate rows in the fused weight matrix are ordered input, forget, cell, output.
//! The matrix multiplies the concatenation `[x; h_prev]`.

use super::tensor::{sigmoid, Tensor};

#[derive(Debug, Clone)]
pub struct StepCache {
    /// `[x; h_prev]`
    pub input: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Runs one step. Returns the new `(h, c)` and the cache for backward.
pub fn step(
    weight: &Tensor,
    bias: &[f64],
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>, StepCache) {
    let hidden = h_prev.len();
    let mut input = Vec::with_capacity(x.len() + hidden);
    input.extend_from_slice(x);
    input.extend_from_slice(h_prev);

    let mut pre = vec![0.0; 4 * hidden];
    weight.matvec_bias(&input, bias, &mut pre);

    let i: Vec<f64> = pre[..hidden].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = pre[hidden..2 * hidden].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = pre[2 * hidden..3 * hidden].iter().map(|v| v.tanh()).collect();
    let o: Vec<f64> = pre[3 * hidden..].iter().map(|&v| sigmoid(v)).collect();

    let c: Vec<f64> = (0..hidden).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();

    let cache = StepCache {
        input,
        i,
        f,
        g,
        o,
        c_prev: c_prev.to_vec(),
        tanh_c,
    };
    (h, c, cache)
}

/// Backward through one step.
///
/// `dh` and `dc` are the loss gradients w.r.t. this step's outputs. Weight
/// gradients are accumulated in place. Returns gradients w.r.t.
/// `(x, h_prev, c_prev)`.
pub fn step_backward(
    weight: &Tensor,
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    d_weight: &mut Tensor,
    d_bias: &mut [f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let hidden = dh.len();
    let mut d_pre = vec![0.0; 4 * hidden];
    let mut dc_prev = vec![0.0; hidden];
    for k in 0..hidden {
        let (i, f, g, o, tc) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k], cache.tanh_c[k]);
        let d_o = dh[k] * tc;
        let dc_total = dc[k] + dh[k] * o * (1.0 - tc * tc);
        let d_i = dc_total * g;
        let d_g = dc_total * i;
        let d_f = dc_total * cache.c_prev[k];
        dc_prev[k] = dc_total * f;
        d_pre[k] = d_i * i * (1.0 - i);
        d_pre[hidden + k] = d_f * f * (1.0 - f);
        d_pre[2 * hidden + k] = d_g * (1.0 - g * g);
        d_pre[3 * hidden + k] = d_o * o * (1.0 - o);
    }
    d_weight.outer_acc(&d_pre, &cache.input);
    for (b, d) in d_bias.iter_mut().zip(&d_pre) {
        *b += d;
    }
    let mut d_input = vec![0.0; cache.input.len()];
    weight.matvec_t_acc(&d_pre, &mut d_input);
    let x_len = cache.input.len() - hidden;
    let dh_prev = d_input.split_off(x_len);
    (d_input, dh_prev, dc_prev)
}
