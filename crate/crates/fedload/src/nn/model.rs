use crate::error::{Error, Result};

use super::cell::{lstm_cell_backward, lstm_cell_forward, CellCache, LayerGrads};
use super::params::{Gradients, ModelParams};

/// Per-forward-pass intermediates needed by [`model_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCaches {
    /// caches[layer][t]
    caches: Vec<Vec<CellCache>>,
    /// Last hidden state of the top layer, input to the dense head.
    h_last: Vec<f64>,
    steps: usize,
}

/// Unrolls all layers over the window from zero initial states and applies
/// the linear dense head to the last top-layer hidden state.
pub fn model_forward(m: &ModelParams, window: &[f64]) -> Result<(f64, ForwardCaches)> {
    if window.is_empty() {
        return Err(Error::Shape("window must be non-empty".into()));
    }
    let n_layers = m.lstm_layers.len();
    let mut h: Vec<Vec<f64>> = m
        .lstm_layers
        .iter()
        .map(|l| vec![0.0; l.hidden_dim])
        .collect();
    let mut c = h.clone();
    let mut caches: Vec<Vec<CellCache>> = vec![Vec::with_capacity(window.len()); n_layers];

    for &x_t in window {
        let mut input = vec![x_t];
        for (l, layer) in m.lstm_layers.iter().enumerate() {
            let (h_new, c_new, cache) = lstm_cell_forward(layer, &input, &h[l], &c[l])?;
            caches[l].push(cache);
            input = h_new.clone();
            h[l] = h_new;
            c[l] = c_new;
        }
    }

    let h_last = h[n_layers - 1].clone();
    let mut pred = m.dense_b;
    for (w, hv) in m.dense_w.values().iter().zip(&h_last) {
        pred += w * hv;
    }
    Ok((
        pred,
        ForwardCaches {
            caches,
            h_last,
            steps: window.len(),
        },
    ))
}

/// loss = (pred - target)^2 and its derivative w.r.t. pred.
pub fn mse_loss(pred: f64, target: f64) -> (f64, f64) {
    let diff = pred - target;
    (diff * diff, 2.0 * diff)
}

/// Exact analytic gradients of the loss w.r.t. every parameter, propagated
/// back through all time steps and layers.
pub fn model_backward(m: &ModelParams, caches: &ForwardCaches, dloss_dpred: f64) -> Result<Gradients> {
    let n_layers = m.lstm_layers.len();
    if caches.caches.len() != n_layers
        || caches.h_last.len() != m.lstm_layers[n_layers - 1].hidden_dim
    {
        return Err(Error::Usage(
            "forward caches do not match this model's shape".into(),
        ));
    }
    let steps = caches.steps;

    let mut grads = m.zeros_like();
    let mut layer_grads: Vec<LayerGrads> = m.lstm_layers.iter().map(LayerGrads::zeros).collect();

    // Dense head.
    for (dw, hv) in grads.dense_w.values_mut().iter_mut().zip(&caches.h_last) {
        *dw = dloss_dpred * hv;
    }
    grads.dense_b = dloss_dpred;

    // dh carried from t+1 within the same layer; dc likewise.
    let mut dh_carry: Vec<Vec<f64>> = m
        .lstm_layers
        .iter()
        .map(|l| vec![0.0; l.hidden_dim])
        .collect();
    let mut dc_carry = dh_carry.clone();

    for t in (0..steps).rev() {
        // dx flowing down from the layer above at this time step.
        let mut dx_from_above: Option<Vec<f64>> = None;
        for l in (0..n_layers).rev() {
            let layer = &m.lstm_layers[l];
            let mut dh = std::mem::replace(&mut dh_carry[l], vec![0.0; layer.hidden_dim]);
            if l == n_layers - 1 && t == steps - 1 {
                for (dhv, w) in dh.iter_mut().zip(m.dense_w.values()) {
                    *dhv += dloss_dpred * w;
                }
            }
            if let Some(dx) = dx_from_above.take() {
                for (dhv, dxv) in dh.iter_mut().zip(&dx) {
                    *dhv += dxv;
                }
            }
            let dc = std::mem::replace(&mut dc_carry[l], vec![0.0; layer.hidden_dim]);
            let (dx, dh_prev, dc_prev) =
                lstm_cell_backward(layer, &caches.caches[l][t], &dh, &dc, &mut layer_grads[l]);
            dh_carry[l] = dh_prev;
            dc_carry[l] = dc_prev;
            dx_from_above = Some(dx);
        }
    }

    for (g, lg) in grads.lstm_layers.iter_mut().zip(layer_grads) {
        g.w_x = lg.d_wx;
        g.w_h = lg.d_wh;
        g.b = lg.d_b;
    }
    debug_assert!(grads.is_finite());
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::init_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_predict_zero() {
        let m = ModelParams::zeros(&[1, 3]).unwrap();
        let (pred, _) = model_forward(&m, &[0.4; 12]).unwrap();
        assert_eq!(pred, 0.0);
    }

    #[test]
    fn only_dense_bias_survives_zero_weights() {
        let mut m = ModelParams::zeros(&[1, 3]).unwrap();
        m.dense_b = 0.3;
        let (pred, _) = model_forward(&m, &[0.9; 12]).unwrap();
        assert_eq!(pred, 0.3);
    }

    #[test]
    fn forward_matches_manual_unrolling() {
        use crate::nn::cell::lstm_cell_forward;
        let m = init_params(&[1, 3, 3], 11).unwrap();
        let window: Vec<f64> = (0..12).map(|i| (i as f64) / 12.0).collect();
        let (pred, _) = model_forward(&m, &window).unwrap();

        // Hand unrolling via the cell op.
        let mut h = vec![vec![0.0; 3]; 2];
        let mut c = h.clone();
        for &x in &window {
            let mut input = vec![x];
            for (l, layer) in m.lstm_layers.iter().enumerate() {
                let (hn, cn, _) = lstm_cell_forward(layer, &input, &h[l], &c[l]).unwrap();
                input = hn.clone();
                h[l] = hn;
                c[l] = cn;
            }
        }
        let mut expected = m.dense_b;
        for (w, hv) in m.dense_w.values().iter().zip(&h[1]) {
            expected += w * hv;
        }
        assert!((pred - expected).abs() < 1e-15);
    }

    #[test]
    fn mse_loss_values() {
        assert_eq!(mse_loss(0.5, 0.5), (0.0, 0.0));
        assert_eq!(mse_loss(1.0, 0.0), (1.0, 2.0));
        let (l, d) = mse_loss(0.2, 0.7);
        assert!((l - 0.25).abs() < 1e-15);
        assert!((d + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let m = init_params(&[1, 3], 5).unwrap();
        let (_, caches) = model_forward(&m, &[0.1; 12]).unwrap();
        let g = model_backward(&m, &caches, 0.0).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_bitwise_deterministic() {
        let m = init_params(&[1, 3], 3).unwrap();
        let window = [0.2, 0.5, 0.1, 0.9, 0.3, 0.7, 0.4, 0.6, 0.8, 0.0, 0.5, 0.2];
        let run = || {
            let (pred, caches) = model_forward(&m, &window).unwrap();
            let (_, dpred) = mse_loss(pred, 0.4);
            model_backward(&m, &caches, dpred).unwrap().flatten()
        };
        assert_eq!(run(), run());
    }

    /// Central finite differences over the flat parameter vector.
    fn numerical_gradient(widths: &[usize], flat: &[f64], window: &[f64], target: f64) -> Vec<f64> {
        let h = 1e-5;
        let loss_at = |v: &[f64]| {
            let m = ModelParams::unflatten(widths, v).unwrap();
            let (pred, _) = model_forward(&m, window).unwrap();
            mse_loss(pred, target).0
        };
        let mut grad = vec![0.0; flat.len()];
        let mut probe = flat.to_vec();
        for k in 0..flat.len() {
            probe[k] = flat[k] + h;
            let up = loss_at(&probe);
            probe[k] = flat[k] - h;
            let down = loss_at(&probe);
            probe[k] = flat[k];
            grad[k] = (up - down) / (2.0 * h);
        }
        grad
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let widths = [1usize, 3];
        let m = init_params(&widths, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let window: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
        let target = rng.gen_range(0.0..1.0);

        let (pred, caches) = model_forward(&m, &window).unwrap();
        let (_, dpred) = mse_loss(pred, target);
        let analytic = model_backward(&m, &caches, dpred).unwrap().flatten();
        let numeric = numerical_gradient(&widths, &m.flatten(), &window, target);

        for (a, n) in analytic.iter().zip(&numeric) {
            if a.abs() > 1e-8 {
                let rel = (a - n).abs() / a.abs().max(n.abs());
                assert!(rel < 1e-4, "analytic {} vs numeric {} (rel {})", a, n, rel);
            }
        }
    }

    #[test]
    fn backward_rejects_mismatched_caches() {
        let small = init_params(&[1, 3], 1).unwrap();
        let big = init_params(&[1, 4], 1).unwrap();
        let (_, caches) = model_forward(&small, &[0.1; 12]).unwrap();
        assert!(model_backward(&big, &caches, 1.0).is_err());
    }
}
