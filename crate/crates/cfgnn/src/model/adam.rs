//! Adam with bias correction and an L2 term folded into the gradient.

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update.
///
/// The weight-decay term `weight_decay * theta` joins the gradient before
/// the moment updates; bias correction uses `m / (1 - beta1^t)` and
/// `v / (1 - beta2^t)`.
pub fn adam_step(state: &mut AdamState, theta: &mut [f64], grad: &[f64], learning_rate: f64, weight_decay: f64) {
    assert_eq!(theta.len(), grad.len(), "gradient shape mismatch");
    assert_eq!(theta.len(), state.m.len(), "state shape mismatch");
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i] + weight_decay * theta[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}
