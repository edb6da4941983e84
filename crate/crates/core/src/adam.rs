//! Adam with L2 weight decay coupled into the gradient.

use crate::error::{Error, Result};
use crate::model::ParamSet;
use crate::scalar::Scalar;
use crate::train::TrainConfig;

/// Per-parameter first/second moment estimates plus the shared step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    /// Zero-initialized moments mirroring the parameter manifest.
    pub fn new(params: &ParamSet) -> Self {
        let m: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        AdamState {
            v: m.clone(),
            m,
            t: 0,
        }
    }
}

/// One Adam update on a single tensor, `t` being the already-incremented
/// (1-based) step:
///
///   g  <- grad + weight_decay * param
///   m  <- beta1 m + (1 - beta1) g
///   v  <- beta2 v + (1 - beta2) g^2
///   param <- param - lr * (m / (1 - beta1^t)) / (sqrt(v / (1 - beta2^t)) + eps)
#[allow(clippy::too_many_arguments)]
pub fn adam_update<F: Scalar>(
    param: &mut [F],
    grad: &[F],
    m: &mut [F],
    v: &mut [F],
    t: u64,
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    weight_decay: F,
) {
    let one = F::one();
    let m_corr = one / (one - beta1.powi(t as i32));
    let v_corr = one / (one - beta2.powi(t as i32));
    for i in 0..param.len() {
        let g = grad[i] + weight_decay * param[i];
        m[i] = beta1 * m[i] + (one - beta1) * g;
        v[i] = beta2 * v[i] + (one - beta2) * g * g;
        let m_hat = m[i] * m_corr;
        let v_hat = v[i] * v_corr;
        param[i] = param[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Apply one optimizer step over every parameter; `grads` is aligned with
/// the parameter order and `state.t` advances exactly once per call.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::InvalidData(format!(
            "optimizer state/gradient count mismatch: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (_, tensor)) in params.iter().enumerate() {
        if grads[i].len() != tensor.numel() || state.m[i].len() != tensor.numel() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: tensor.shape().to_vec(),
                rhs: vec![grads[i].len()],
            });
        }
    }
    state.t += 1;
    let t = state.t;
    for (i, (_, tensor)) in params.iter_mut().enumerate() {
        adam_update(
            tensor.data_mut(),
            &grads[i],
            &mut state.m[i],
            &mut state.v[i],
            t,
            cfg.lr,
            cfg.beta1,
            cfg.beta2,
            cfg.adam_eps,
            cfg.weight_decay,
        );
    }
    Ok(())
}
