use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, laid out like the network's
/// parameter slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(network: &Network) -> Self {
        let zeros: Vec<Vec<f64>> = network.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, config: &AdamConfig, network: &mut Network, grads: &Gradients) {
        self.t += 1;
        let t = self.t as i32;
        let bias1 = 1.0 - config.beta1.powi(t);
        let bias2 = 1.0 - config.beta2.powi(t);
        for (((p, g), m), v) in network
            .param_slices_mut()
            .into_iter()
            .zip(&grads.0)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for k in 0..p.len() {
                m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
                v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                p[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::NetworkKind;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = Network::with_layers(NetworkKind::Ffnn, 2, &[], 1, 3);
        let before = net.dense[0].weights.clone();
        let mut grads = net.zero_gradients();
        grads.0[0] = vec![0.5, -2.0];
        let mut st = AdamState::new(&net);
        let cfg = AdamConfig::default();
        st.step(&cfg, &mut net, &grads);
        // bias-corrected first step is lr * sign(g) up to epsilon
        assert!((net.dense[0].weights[0] - (before[0] - 1e-3)).abs() < 1e-9);
        assert!((net.dense[0].weights[1] - (before[1] + 1e-3)).abs() < 1e-9);
        assert_eq!(net.dense[0].bias, vec![0.0]);
    }
}
