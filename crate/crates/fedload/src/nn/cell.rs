use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::params::LstmLayerParams;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediates from one cell step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_g: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// One gated update:
/// z = W_x x + W_h h_prev + b; i = sigma(z_i), f = sigma(z_f),
/// g = tanh(z_g), o = sigma(z_o); c = f*c_prev + i*g; h = o*tanh(c).
pub fn lstm_cell_forward(
    p: &LstmLayerParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, CellCache)> {
    let h_dim = p.hidden_dim;
    if x.len() != p.input_dim {
        return Err(Error::Shape(format!(
            "cell input has length {}, expected {}",
            x.len(),
            p.input_dim
        )));
    }
    if h_prev.len() != h_dim || c_prev.len() != h_dim {
        return Err(Error::Shape(format!(
            "cell state has length {}/{}, expected {}",
            h_prev.len(),
            c_prev.len(),
            h_dim
        )));
    }

    let mut z = p.b.values().to_vec();
    p.w_x.matvec_add_into(x, &mut z);
    p.w_h.matvec_add_into(h_prev, &mut z);

    let mut gate_i = vec![0.0; h_dim];
    let mut gate_f = vec![0.0; h_dim];
    let mut gate_g = vec![0.0; h_dim];
    let mut gate_o = vec![0.0; h_dim];
    for j in 0..h_dim {
        gate_i[j] = sigmoid(z[j]);
        gate_f[j] = sigmoid(z[h_dim + j]);
        gate_g[j] = z[2 * h_dim + j].tanh();
        gate_o[j] = sigmoid(z[3 * h_dim + j]);
    }

    let mut c = vec![0.0; h_dim];
    let mut tanh_c = vec![0.0; h_dim];
    let mut h = vec![0.0; h_dim];
    for j in 0..h_dim {
        c[j] = gate_f[j] * c_prev[j] + gate_i[j] * gate_g[j];
        tanh_c[j] = c[j].tanh();
        h[j] = gate_o[j] * tanh_c[j];
    }

    let cache = CellCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gate_i,
        gate_f,
        gate_g,
        gate_o,
        c: c.clone(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Gradient accumulators for one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_wx: Matrix,
    pub d_wh: Matrix,
    pub d_b: Matrix,
}

impl LayerGrads {
    pub fn zeros(p: &LstmLayerParams) -> Self {
        LayerGrads {
            d_wx: Matrix::zeros(4 * p.hidden_dim, p.input_dim),
            d_wh: Matrix::zeros(4 * p.hidden_dim, p.hidden_dim),
            d_b: Matrix::zeros(4 * p.hidden_dim, 1),
        }
    }
}

/// Backward step through one cell. `dh` and `dc_next` are the loss gradients
/// w.r.t. this step's h and (from the following step) c. Accumulates into
/// `grads` and returns (dx, dh_prev, dc_prev).
pub fn lstm_cell_backward(
    p: &LstmLayerParams,
    cache: &CellCache,
    dh: &[f64],
    dc_next: &[f64],
    grads: &mut LayerGrads,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h_dim = p.hidden_dim;
    debug_assert_eq!(dh.len(), h_dim);
    debug_assert_eq!(dc_next.len(), h_dim);

    // dz over the concatenated [i, f, g, o] axis.
    let mut dz = vec![0.0; 4 * h_dim];
    for j in 0..h_dim {
        let o = cache.gate_o[j];
        let tc = cache.tanh_c[j];
        let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);

        let i = cache.gate_i[j];
        let f = cache.gate_f[j];
        let g = cache.gate_g[j];

        dz[j] = dc * g * i * (1.0 - i);
        dz[h_dim + j] = dc * cache.c_prev[j] * f * (1.0 - f);
        dz[2 * h_dim + j] = dc * i * (1.0 - g * g);
        dz[3 * h_dim + j] = dh[j] * tc * o * (1.0 - o);
    }

    grads.d_wx.outer_add_assign(&dz, &cache.x);
    grads.d_wh.outer_add_assign(&dz, &cache.h_prev);
    for (db, dzv) in grads.d_b.values_mut().iter_mut().zip(&dz) {
        *db += dzv;
    }

    let mut dx = vec![0.0; p.input_dim];
    p.w_x.matvec_t_add_into(&dz, &mut dx);
    let mut dh_prev = vec![0.0; h_dim];
    p.w_h.matvec_t_add_into(&dz, &mut dh_prev);
    let mut dc_prev = vec![0.0; h_dim];
    for j in 0..h_dim {
        let o = cache.gate_o[j];
        let tc = cache.tanh_c[j];
        let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
        dc_prev[j] = dc * cache.gate_f[j];
    }
    (dx, dh_prev, dc_prev)
}
