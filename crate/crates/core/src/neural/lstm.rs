use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate blocks in the stacked weight matrix, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    Candidate = 3,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One LSTM layer. The four gate matrices act on the concatenation
/// `[h_{t-1}, x_t]` and are stacked row-wise in `weights`
/// (`4 * units` rows of `units + inputs` columns, forget/input/output/candidate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub inputs: usize,
    pub units: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Carried hidden and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        LstmState {
            h: vec![0.0; units],
            c: vec![0.0; units],
        }
    }
}

/// Values kept from the forward pass of one time step.
#[derive(Debug, Clone, Default)]
pub(crate) struct StepCache {
    /// `[h_{t-1}, x_t]`
    pub concat: Vec<f64>,
    /// Activated gates: forget, input, output (sigmoid), candidate (tanh).
    pub gates: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(inputs: usize, units: usize) -> Self {
        LstmLayer {
            inputs,
            units,
            weights: vec![0.0; 4 * units * (units + inputs)],
            bias: vec![0.0; 4 * units],
        }
    }

    /// Uniform weights in `+-1/sqrt(units)`, forget-gate bias at 1.
    pub fn random(inputs: usize, units: usize, rng: &mut impl Rng) -> Self {
        let limit = 1.0 / (units as f64).sqrt();
        let mut layer = Self::zeros(inputs, units);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        for b in &mut layer.bias[..units] {
            *b = 1.0;
        }
        layer
    }

    fn width(&self) -> usize {
        self.units + self.inputs
    }

    pub fn gate_weights(&self, gate: Gate) -> &[f64] {
        let block = self.units * self.width();
        &self.weights[gate as usize * block..(gate as usize + 1) * block]
    }

    pub fn gate_bias(&self, gate: Gate) -> &[f64] {
        &self.bias[gate as usize * self.units..(gate as usize + 1) * self.units]
    }

    /// Advances the state by one input and returns the new hidden state.
    pub fn step(&self, state: &mut LstmState, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::Dimension {
                expected: self.inputs,
                actual: x.len(),
            });
        }
        if state.h.len() != self.units || state.c.len() != self.units {
            return Err(Error::Dimension {
                expected: self.units,
                actual: state.h.len(),
            });
        }
        let mut cache = StepCache::default();
        self.step_cached(&state.h, &state.c, x, &mut cache);
        state.h.clone_from(&cache.h);
        state.c.clone_from(&cache.c);
        Ok(cache.h)
    }

    pub(crate) fn step_cached(&self, h_prev: &[f64], c_prev: &[f64], x: &[f64], cache: &mut StepCache) {
        let u = self.units;
        let width = self.width();
        cache.concat.clear();
        cache.concat.extend_from_slice(h_prev);
        cache.concat.extend_from_slice(x);
        cache.gates.resize(4 * u, 0.0);
        for (r, g) in cache.gates.iter_mut().enumerate() {
            let row = &self.weights[r * width..(r + 1) * width];
            let z = self.bias[r] + row.iter().zip(&cache.concat).map(|(w, a)| w * a).sum::<f64>();
            *g = if r < 3 * u { sigmoid(z) } else { z.tanh() };
        }
        cache.c_prev.clear();
        cache.c_prev.extend_from_slice(c_prev);
        cache.c.resize(u, 0.0);
        cache.tanh_c.resize(u, 0.0);
        cache.h.resize(u, 0.0);
        for k in 0..u {
            let (f, i, o, g) = (
                cache.gates[k],
                cache.gates[u + k],
                cache.gates[2 * u + k],
                cache.gates[3 * u + k],
            );
            cache.c[k] = f * c_prev[k] + i * g;
            cache.tanh_c[k] = cache.c[k].tanh();
            cache.h[k] = o * cache.tanh_c[k];
        }
    }

    /// Backpropagates through a whole sequence starting from zero state.
    ///
    /// `d_h` holds the loss gradient with respect to each step's hidden
    /// output; on return `d_x` holds the gradient with respect to each
    /// step's input.
    pub(crate) fn backward_sequence(
        &self,
        caches: &[StepCache],
        d_h: &[Vec<f64>],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        d_x: &mut [Vec<f64>],
        scratch: &mut LstmScratch,
    ) {
        let u = self.units;
        let width = self.width();
        scratch.dh_next.clear();
        scratch.dh_next.resize(u, 0.0);
        scratch.dc_next.clear();
        scratch.dc_next.resize(u, 0.0);
        scratch.dz.resize(4 * u, 0.0);
        scratch.d_concat.resize(width, 0.0);
        for t in (0..caches.len()).rev() {
            let cache = &caches[t];
            for k in 0..u {
                let dh = d_h[t][k] + scratch.dh_next[k];
                let (f, i, o, g) = (
                    cache.gates[k],
                    cache.gates[u + k],
                    cache.gates[2 * u + k],
                    cache.gates[3 * u + k],
                );
                let tc = cache.tanh_c[k];
                let dc = dh * o * (1.0 - tc * tc) + scratch.dc_next[k];
                let d_o = dh * tc;
                let d_f = dc * cache.c_prev[k];
                let d_i = dc * g;
                let d_g = dc * i;
                scratch.dc_next[k] = dc * f;
                scratch.dz[k] = d_f * f * (1.0 - f);
                scratch.dz[u + k] = d_i * i * (1.0 - i);
                scratch.dz[2 * u + k] = d_o * o * (1.0 - o);
                scratch.dz[3 * u + k] = d_g * (1.0 - g * g);
            }
            scratch.d_concat.iter_mut().for_each(|v| *v = 0.0);
            for (r, &dz) in scratch.dz.iter().enumerate() {
                grad_b[r] += dz;
                if dz == 0.0 {
                    continue;
                }
                let row = &self.weights[r * width..(r + 1) * width];
                let grow = &mut grad_w[r * width..(r + 1) * width];
                for ((gw, &a), (dc, &w)) in grow
                    .iter_mut()
                    .zip(&cache.concat)
                    .zip(scratch.d_concat.iter_mut().zip(row))
                {
                    *gw += dz * a;
                    *dc += dz * w;
                }
            }
            scratch.dh_next.copy_from_slice(&scratch.d_concat[..u]);
            d_x[t].copy_from_slice(&scratch.d_concat[u..]);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LstmScratch {
    dh_next: Vec<f64>,
    dc_next: Vec<f64>,
    dz: Vec<f64>,
    d_concat: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_halve_the_cell() {
        let layer = LstmLayer::zeros(3, 4);
        let mut state = LstmState {
            h: vec![0.3, -0.2, 0.9, 0.0],
            c: vec![2.0, -1.0, 0.5, 0.0],
        };
        let h = layer.step(&mut state, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(state.c, vec![1.0, -0.5, 0.25, 0.0]);
        for k in 0..4 {
            assert_eq!(h[k], 0.5 * state.c[k].tanh());
        }
        let mut zero = LstmState::zeros(4);
        assert_eq!(layer.step(&mut zero, &[0.0; 3]).unwrap(), vec![0.0; 4]);
    }

    /// Scalar-by-scalar evaluation of the gate equations for a 2-unit layer.
    #[test]
    fn matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = LstmLayer::random(3, 2, &mut rng);
        let mut b = layer.bias.clone();
        for v in &mut b {
            *v += 0.1;
        }
        let layer = LstmLayer { bias: b, ..layer };
        let h0 = [0.2, -0.4];
        let c0 = [0.7, 0.1];
        let x = [0.5, -1.5, 2.0];
        let concat = [h0[0], h0[1], x[0], x[1], x[2]];
        let gate = |g: Gate, k: usize| {
            let w = layer.gate_weights(g);
            let mut z = layer.gate_bias(g)[k];
            for j in 0..5 {
                z += w[k * 5 + j] * concat[j];
            }
            z
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut state = LstmState {
            h: h0.to_vec(),
            c: c0.to_vec(),
        };
        let h = layer.step(&mut state, &x).unwrap();
        for k in 0..2 {
            let f = sig(gate(Gate::Forget, k));
            let i = sig(gate(Gate::Input, k));
            let o = sig(gate(Gate::Output, k));
            let cand = gate(Gate::Candidate, k).tanh();
            let c = f * c0[k] + i * cand;
            assert!((state.c[k] - c).abs() < 1e-14);
            assert!((h[k] - o * c.tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_errors() {
        let layer = LstmLayer::zeros(2, 3);
        let mut st = LstmState::zeros(3);
        assert!(layer.step(&mut st, &[1.0]).is_err());
        let mut bad = LstmState::zeros(2);
        assert!(layer.step(&mut bad, &[1.0, 2.0]).is_err());
    }
}
