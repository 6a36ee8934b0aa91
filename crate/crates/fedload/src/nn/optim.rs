use crate::error::{Error, Result};

use super::params::{Gradients, ModelParams};

/// Adam first/second moment estimates plus step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state (zero moments, t = 0) with the canonical defaults
    /// beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(widths: &[usize]) -> Result<Self> {
        Ok(AdamState {
            m: ModelParams::zeros(widths)?,
            v: ModelParams::zeros(widths)?,
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        })
    }
}

fn check_congruent(m: &ModelParams, g: &Gradients) -> Result<()> {
    if !m.shape_congruent(g) {
        return Err(Error::Shape(format!(
            "gradient widths {:?} do not match parameter widths {:?}",
            g.widths(),
            m.widths()
        )));
    }
    Ok(())
}

/// Plain gradient step: p <- p - lr * g.
pub fn sgd_step(m: &ModelParams, g: &Gradients, lr: f64) -> Result<ModelParams> {
    check_congruent(m, g)?;
    let widths = m.widths();
    let flat: Vec<f64> = m
        .flatten()
        .iter()
        .zip(g.flatten().iter())
        .map(|(p, gv)| p - lr * gv)
        .collect();
    ModelParams::unflatten(&widths, &flat)
}

/// Adam with bias correction; returns updated params and state (t incremented).
pub fn adam_step(
    m: &ModelParams,
    g: &Gradients,
    state: &AdamState,
    lr: f64,
) -> Result<(ModelParams, AdamState)> {
    check_congruent(m, g)?;
    check_congruent(m, &state.m)?;
    let widths = m.widths();
    let t = state.t + 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    let params = m.flatten();
    let grads = g.flatten();
    let mut mom1 = state.m.flatten();
    let mut mom2 = state.v.flatten();
    let mut out = vec![0.0; params.len()];

    let corr1 = 1.0 - b1.powi(t as i32);
    let corr2 = 1.0 - b2.powi(t as i32);
    for k in 0..params.len() {
        mom1[k] = b1 * mom1[k] + (1.0 - b1) * grads[k];
        mom2[k] = b2 * mom2[k] + (1.0 - b2) * grads[k] * grads[k];
        let m_hat = mom1[k] / corr1;
        let v_hat = mom2[k] / corr2;
        out[k] = params[k] - lr * m_hat / (v_hat.sqrt() + eps);
    }

    let new_state = AdamState {
        m: ModelParams::unflatten(&widths, &mom1)?,
        v: ModelParams::unflatten(&widths, &mom2)?,
        t,
        beta1: b1,
        beta2: b2,
        epsilon: eps,
    };
    Ok((ModelParams::unflatten(&widths, &out)?, new_state))
}
