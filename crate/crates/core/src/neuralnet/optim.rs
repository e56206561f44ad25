//! Parameter update rules over flat parameter vectors.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment accumulators and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

/// Momentum SGD in velocity form: `v ← −η·g + α·v`, `w ← w + v`.
pub fn sgd_momentum_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], learning_rate: f64, momentum: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), velocity.len());
    for i in 0..params.len() {
        velocity[i] = -learning_rate * grads[i] + momentum * velocity[i];
        params[i] += velocity[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_is_lr_times_sign() {
        let cfg = AdamConfig::default();
        for g in [3.7, -0.002, 1e4] {
            let mut w = [1.0];
            let mut s = AdamState::new(1);
            adam_step(&mut w, &[g], &mut s, &cfg);
            let delta = w[0] - 1.0;
            assert!((delta + cfg.learning_rate * g.signum()).abs() < 1e-5 * cfg.learning_rate);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = [0.3, -2.0];
        let mut s = AdamState::new(2);
        for _ in 0..50 {
            adam_step(&mut w, &[0.0, 0.0], &mut s, &AdamConfig::default());
        }
        assert_eq!(w, [0.3, -2.0]);
    }

    #[test]
    fn adam_on_square_matches_hand_trace() {
        // f(w) = w², g = 2w, lr 0.01, from w = 1.
        let cfg = AdamConfig::default();
        let mut w = [1.0];
        let mut s = AdamState::new(1);
        let (mut hw, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut prev = 1.0f64;
        for t in 1..=10 {
            let g = 2.0 * w[0];
            adam_step(&mut w, &[g], &mut s, &cfg);

            let hg = 2.0 * hw;
            m = 0.9 * m + 0.1 * hg;
            v = 0.999 * v + 0.001 * hg * hg;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            hw -= 0.01 * mh / (vh.sqrt() + 1e-8);

            assert!((w[0] - hw).abs() < 1e-12);
            assert!(w[0].abs() < prev.abs());
            prev = w[0];
        }
    }

    #[test]
    fn momentum_zero_is_plain_gradient_descent() {
        let mut w = [1.0, 2.0];
        let mut v = [0.0, 0.0];
        sgd_momentum_step(&mut w, &[0.5, -1.0], &mut v, 0.1, 0.0);
        assert_eq!(w, [1.0 - 0.05, 2.0 + 0.1]);
    }

    #[test]
    fn constant_gradient_velocity_converges() {
        let (eta, g) = (0.1, 3.0);
        let mut w = [0.0];
        let mut v = [0.0];
        for _ in 0..200 {
            sgd_momentum_step(&mut w, &[g], &mut v, eta, 0.5);
        }
        assert!((v[0] + 2.0 * eta * g).abs() < 1e-12);
    }

    #[test]
    fn momentum_on_quadratic_two_steps() {
        // f(w) = 3w², g = 6w; η = 0.05, α = 0.9, from w = 2.
        let mut w = [2.0];
        let mut v = [0.0];
        sgd_momentum_step(&mut w, &[12.0], &mut v, 0.05, 0.9);
        // v1 = -0.6, w1 = 1.4
        assert!((v[0] + 0.6).abs() < 1e-12 && (w[0] - 1.4).abs() < 1e-12);
        let g = 6.0 * w[0];
        sgd_momentum_step(&mut w, &[g], &mut v, 0.05, 0.9);
        // v2 = -0.05·8.4 + 0.9·(-0.6) = -0.96, w2 = 0.44
        assert!((v[0] + 0.96).abs() < 1e-12 && (w[0] - 0.44).abs() < 1e-12);
    }
}
