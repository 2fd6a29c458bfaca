use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Fully connected layer, `out_j = act(sum_i w[i][j] * in_i + b_j)`.
///
/// `weights` is stored row-major as `inputs x outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// Uniform initialisation scaled by fan-in (He for ReLU, Glorot for the
    /// linear output); biases start at zero.
    pub fn random(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / inputs as f64).sqrt(),
            Activation::Linear => (6.0 / (inputs + outputs) as f64).sqrt(),
        };
        let mut layer = Self::zeros(inputs, outputs, activation);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.inputs {
            return Err(Error::Dimension {
                expected: self.inputs,
                actual: input.len(),
            });
        }
        let mut pre = vec![0.0; self.outputs];
        let mut out = vec![0.0; self.outputs];
        self.forward_into(input, &mut pre, &mut out);
        Ok(out)
    }

    pub(crate) fn forward_into(&self, input: &[f64], pre: &mut [f64], out: &mut [f64]) {
        pre.copy_from_slice(&self.bias);
        for (i, &a) in input.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            for (z, &w) in pre.iter_mut().zip(row) {
                *z += w * a;
            }
        }
        for (o, &z) in out.iter_mut().zip(pre.iter()) {
            *o = self.activation.apply(z);
        }
    }

    /// Accumulates parameter gradients for one sample and, if requested,
    /// writes the gradient with respect to the input.
    pub(crate) fn backward(
        &self,
        input: &[f64],
        pre: &[f64],
        d_out: &[f64],
        dz: &mut [f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        d_input: Option<&mut [f64]>,
    ) {
        for ((d, &g), &z) in dz.iter_mut().zip(d_out).zip(pre) {
            *d = g * self.activation.derivative(z);
        }
        for (gb, &d) in grad_b.iter_mut().zip(dz.iter()) {
            *gb += d;
        }
        for (i, &a) in input.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &mut grad_w[i * self.outputs..(i + 1) * self.outputs];
            for (gw, &d) in row.iter_mut().zip(dz.iter()) {
                *gw += a * d;
            }
        }
        if let Some(d_input) = d_input {
            for (i, di) in d_input.iter_mut().enumerate() {
                let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                *di = row.iter().zip(dz.iter()).map(|(w, d)| w * d).sum();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_linear() {
        let mut l = DenseLayer::zeros(3, 3, Activation::Linear);
        for i in 0..3 {
            l.weights[i * 3 + i] = 1.0;
        }
        assert_eq!(l.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn relu_clips_negatives() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
    }

    #[test]
    fn hand_evaluated_weighted_sum() {
        let l = DenseLayer {
            inputs: 2,
            outputs: 1,
            weights: vec![1.0, 2.0],
            bias: vec![0.5],
            activation: Activation::Relu,
        };
        assert_eq!(l.forward(&[1.0, 1.0]).unwrap(), vec![3.5]);
        assert!(matches!(l.forward(&[1.0]), Err(Error::Dimension { .. })));
    }
}
