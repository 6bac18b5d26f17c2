//! Adam optimizer state with bias correction.

use super::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, one slot per network parameter in
/// [`Mlp::params`] order.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    params: AdamParams,
}

impl AdamState {
    pub fn new(net: &Mlp, params: AdamParams) -> Self {
        AdamState {
            m: vec![0.0; net.param_count()],
            v: vec![0.0; net.param_count()],
            step: 0,
            params,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn hyperparams(&self) -> AdamParams {
        self.params
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.params.lr = lr;
    }

    /// One Adam update, minimizing along `grads`.
    pub fn apply(&mut self, net: &mut Mlp, grads: &Gradients) {
        debug_assert_eq!(net.param_count(), self.m.len());
        self.step += 1;
        let AdamParams {
            lr,
            beta1,
            beta2,
            eps,
        } = self.params;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in net
            .params_mut()
            .zip(grads.flat())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
