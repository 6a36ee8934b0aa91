use crate::error::{Error, Result};
use crate::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gate block order along the 4H axis. Fixed everywhere: forward, backward,
/// flatten, unflatten.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CANDIDATE: usize = 2;
pub const GATE_OUTPUT: usize = 3;

/// Parameters of one gated recurrent layer.
///
/// `w_x` is 4H x I, `w_h` is 4H x H, `b` is 4H x 1, with gate blocks in
/// [input, forget, candidate, output] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Matrix,
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmLayerParams {
            input_dim,
            hidden_dim,
            w_x: Matrix::zeros(4 * hidden_dim, input_dim),
            w_h: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: Matrix::zeros(4 * hidden_dim, 1),
        }
    }
}

/// Full parameter set of the forecaster: stacked gated layers plus a linear
/// dense head mapping the last hidden state to a scalar prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lstm_layers: Vec<LstmLayerParams>,
    pub dense_w: Matrix,
    pub dense_b: f64,
}

/// Gradients share the exact shape tree of the parameters they differentiate.
pub type Gradients = ModelParams;

impl ModelParams {
    /// Layer widths as `[input_dim, hidden_0, hidden_1, ...]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.lstm_layers.len() + 1);
        w.push(self.lstm_layers[0].input_dim);
        for layer in &self.lstm_layers {
            w.push(layer.hidden_dim);
        }
        w
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        validate_widths(widths)?;
        let lstm_layers = widths
            .windows(2)
            .map(|w| LstmLayerParams::zeros(w[0], w[1]))
            .collect::<Vec<_>>();
        let h_last = *widths.last().unwrap();
        Ok(ModelParams {
            lstm_layers,
            dense_w: Matrix::zeros(1, h_last),
            dense_b: 0.0,
        })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams::zeros(&self.widths()).expect("existing params have valid widths")
    }

    pub fn shape_congruent(&self, other: &ModelParams) -> bool {
        self.widths() == other.widths()
    }

    pub fn is_finite(&self) -> bool {
        self.lstm_layers
            .iter()
            .all(|l| l.w_x.is_finite() && l.w_h.is_finite() && l.b.is_finite())
            && self.dense_w.is_finite()
            && self.dense_b.is_finite()
    }

    /// Total number of scalar parameters for the given widths.
    pub fn param_count(widths: &[usize]) -> usize {
        let mut n = 0;
        for w in widths.windows(2) {
            let (i, h) = (w[0], w[1]);
            n += 4 * h * i + 4 * h * h + 4 * h;
        }
        n + widths.last().copied().unwrap_or(0) + 1
    }

    /// Canonical flat vector: layers in order, within a layer `w_x`, `w_h`,
    /// `b` (row-major, gate order), then `dense_w`, `dense_b`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(ModelParams::param_count(&self.widths()));
        for layer in &self.lstm_layers {
            v.extend_from_slice(layer.w_x.values());
            v.extend_from_slice(layer.w_h.values());
            v.extend_from_slice(layer.b.values());
        }
        v.extend_from_slice(self.dense_w.values());
        v.push(self.dense_b);
        v
    }

    /// Inverse of [`flatten`](Self::flatten) for the given widths.
    pub fn unflatten(widths: &[usize], flat: &[f64]) -> Result<Self> {
        validate_widths(widths)?;
        let expected = ModelParams::param_count(widths);
        if flat.len() != expected {
            return Err(Error::Shape(format!(
                "flat vector length {} does not match parameter count {} for widths {:?}",
                flat.len(),
                expected,
                widths
            )));
        }
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = flat[pos..pos + n].to_vec();
            pos += n;
            s
        };
        let mut lstm_layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (i, h) = (w[0], w[1]);
            lstm_layers.push(LstmLayerParams {
                input_dim: i,
                hidden_dim: h,
                w_x: Matrix::from_vec(4 * h, i, take(4 * h * i))?,
                w_h: Matrix::from_vec(4 * h, h, take(4 * h * h))?,
                b: Matrix::from_vec(4 * h, 1, take(4 * h))?,
            });
        }
        let h_last = *widths.last().unwrap();
        let dense_w = Matrix::from_vec(1, h_last, take(h_last))?;
        let dense_b = flat[pos];
        Ok(ModelParams {
            lstm_layers,
            dense_w,
            dense_b,
        })
    }
}

fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::Config(format!(
            "layer widths need an input dim and at least one hidden layer, got {:?}",
            widths
        )));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::Config(format!(
            "layer widths must be positive, got {:?}",
            widths
        )));
    }
    Ok(())
}

/// Glorot-uniform initialization: each weight matrix is drawn from
/// U(-b, b) with b = sqrt(6 / (rows + cols)). Biases are zero except the
/// forget-gate block, which starts at 1.0. Deterministic given the seed.
pub fn init_params(widths: &[usize], seed: u64) -> Result<ModelParams> {
    validate_widths(widths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let values = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Matrix::from_vec(rows, cols, values).expect("generated exact count")
    };
    let mut lstm_layers = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let (i, h) = (w[0], w[1]);
        let mut b = Matrix::zeros(4 * h, 1);
        for r in GATE_FORGET * h..(GATE_FORGET + 1) * h {
            b.set(r, 0, 1.0);
        }
        lstm_layers.push(LstmLayerParams {
            input_dim: i,
            hidden_dim: h,
            w_x: glorot(4 * h, i),
            w_h: glorot(4 * h, h),
            b,
        });
    }
    let h_last = *widths.last().unwrap();
    Ok(ModelParams {
        lstm_layers,
        dense_w: glorot(1, h_last),
        dense_b: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&[1, 4], 7).unwrap();
        let b = init_params(&[1, 4], 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forget_gate_bias_is_one_others_zero() {
        let p = init_params(&[1, 4], 7).unwrap();
        let b = &p.lstm_layers[0].b;
        for gate in 0..4 {
            for r in gate * 4..(gate + 1) * 4 {
                let expected = if gate == GATE_FORGET { 1.0 } else { 0.0 };
                assert_eq!(b.get(r, 0), expected);
            }
        }
    }

    #[test]
    fn weights_respect_glorot_bound() {
        let p = init_params(&[1, 200, 200], 3).unwrap();
        for layer in &p.lstm_layers {
            for (m, (rows, cols)) in [
                (&layer.w_x, (4 * layer.hidden_dim, layer.input_dim)),
                (&layer.w_h, (4 * layer.hidden_dim, layer.hidden_dim)),
            ] {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                assert!(m.values().iter().all(|w| w.abs() <= bound));
            }
        }
    }

    #[test]
    fn param_count_matches_dimension_arithmetic() {
        // widths [1,2]: 4*2*1 + 4*2*2 + 4*2 + 2 + 1 = 35
        assert_eq!(ModelParams::param_count(&[1, 2]), 35);
    }

    #[test]
    fn flatten_unflatten_round_trip() {
        let p = init_params(&[1, 3, 2], 11).unwrap();
        let flat = p.flatten();
        assert_eq!(flat.len(), ModelParams::param_count(&[1, 3, 2]));
        let q = ModelParams::unflatten(&[1, 3, 2], &flat).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_vector_gives_zero_params() {
        let n = ModelParams::param_count(&[1, 2]);
        let p = ModelParams::unflatten(&[1, 2], &vec![0.0; n]).unwrap();
        assert_eq!(p, ModelParams::zeros(&[1, 2]).unwrap());
    }

    #[test]
    fn unflatten_rejects_wrong_length() {
        assert!(matches!(
            ModelParams::unflatten(&[1, 2], &[0.0; 3]),
            Err(crate::error::Error::Shape(_))
        ));
    }

    #[test]
    fn invalid_widths_rejected() {
        assert!(init_params(&[1], 0).is_err());
        assert!(init_params(&[1, 0, 2], 0).is_err());
        assert!(init_params(&[], 0).is_err());
    }
}
