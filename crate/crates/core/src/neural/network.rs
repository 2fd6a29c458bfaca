use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dense::{Activation, DenseLayer};
use super::lstm::{LstmLayer, LstmScratch, StepCache};
use super::{NetworkConfig, NetworkKind};
use crate::error::{Error, Result};
use crate::timeseries::Matrix;

/// Training loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Mae,
    Mse,
}

impl Loss {
    fn value(self, residual: f64) -> f64 {
        match self {
            Loss::Mae => residual.abs(),
            Loss::Mse => residual * residual,
        }
    }

    fn derivative(self, residual: f64) -> f64 {
        match self {
            Loss::Mae => {
                if residual > 0.0 {
                    1.0
                } else if residual < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::Mse => 2.0 * residual,
        }
    }
}

/// Regression network with a single linear output unit. An FFNN stacks
/// ReLU dense layers; an LSTM stacks recurrent layers over a lookback
/// sequence and reads the last hidden state.
///
/// A sample is one input row for an FFNN and `lookback` consecutive rows
/// flattened oldest first for an LSTM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: NetworkKind,
    pub n_inputs: usize,
    pub lookback: usize,
    pub lstm: Vec<LstmLayer>,
    /// Hidden dense layers followed by the output layer.
    pub dense: Vec<DenseLayer>,
}

/// Gradient buffers laid out like [`Network::param_slices`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    fn add(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        self.0.iter_mut().flatten().for_each(|g| *g *= factor);
    }

    pub fn flat(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }
}

const CHUNK: usize = 128;

impl Network {
    /// Fresh network for a validated configuration.
    pub fn new(config: &NetworkConfig, n_inputs: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let hidden = vec![config.neurons; config.hidden_layers];
        Ok(Self::with_layers(config.kind, n_inputs, &hidden, config.lookback, seed))
    }

    /// Arbitrary layer widths, without the sweep-grid bounds. An empty
    /// `hidden` gives a purely linear FFNN.
    pub fn with_layers(kind: NetworkKind, n_inputs: usize, hidden: &[usize], lookback: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lstm = Vec::new();
        let mut dense = Vec::new();
        let mut width = n_inputs;
        for &units in hidden {
            match kind {
                NetworkKind::Ffnn => dense.push(DenseLayer::random(width, units, Activation::Relu, &mut rng)),
                NetworkKind::Lstm => lstm.push(LstmLayer::random(width, units, &mut rng)),
            }
            width = units;
        }
        dense.push(DenseLayer::random(width, 1, Activation::Linear, &mut rng));
        Network {
            kind,
            n_inputs,
            lookback: if kind == NetworkKind::Lstm { lookback.max(1) } else { 1 },
            lstm,
            dense,
        }
    }

    pub fn sample_width(&self) -> usize {
        self.n_inputs * self.lookback
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.lstm {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        for l in &self.dense {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.lstm {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        for l in &mut self.dense {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(self.param_slices().iter().map(|s| vec![0.0; s.len()]).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn check_samples(&self, samples: &Matrix) -> Result<()> {
        if samples.cols() != self.sample_width() {
            return Err(Error::Dimension {
                expected: self.sample_width(),
                actual: samples.cols(),
            });
        }
        Ok(())
    }

    /// One prediction per sample row.
    pub fn forward(&self, samples: &Matrix) -> Result<Vec<f64>> {
        self.check_samples(samples)?;
        let idx: Vec<usize> = (0..samples.rows()).collect();
        let out = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut cache = SampleCache::default();
                chunk
                    .iter()
                    .map(|&r| self.forward_sample(samples.row(r), &mut cache))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        Ok(out.into_iter().flatten().collect())
    }

    /// Mean loss over the selected samples and its gradient.
    pub fn loss_and_gradient(
        &self,
        samples: &Matrix,
        targets: &[f64],
        indices: &[usize],
        loss: Loss,
    ) -> Result<(f64, Gradients)> {
        self.check_samples(samples)?;
        if targets.len() != samples.rows() {
            return Err(Error::LengthMismatch {
                left: samples.rows(),
                right: targets.len(),
            });
        }
        if indices.is_empty() {
            return Err(Error::EmptyInput("training batch"));
        }
        // Fixed chunks summed in order keep the result independent of the
        // thread schedule.
        let partials: Vec<(f64, Gradients)> = indices
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grads = self.zero_gradients();
                let mut cache = SampleCache::default();
                let mut total = 0.0;
                for &r in chunk {
                    let y = self.forward_sample(samples.row(r), &mut cache);
                    let residual = y - targets[r];
                    total += loss.value(residual);
                    self.backward_sample(&mut cache, loss.derivative(residual), &mut grads);
                }
                (total, grads)
            })
            .collect();
        let mut iter = partials.into_iter();
        let (mut total, mut grads) = iter.next().expect("at least one chunk");
        for (t, g) in iter {
            total += t;
            grads.add(&g);
        }
        let n = indices.len() as f64;
        grads.scale(1.0 / n);
        Ok((total / n, grads))
    }

    /// Mean loss without gradients.
    pub fn loss(&self, samples: &Matrix, targets: &[f64], loss: Loss) -> Result<f64> {
        let pred = self.forward(samples)?;
        if pred.len() != targets.len() || pred.is_empty() {
            return Err(Error::LengthMismatch {
                left: pred.len(),
                right: targets.len(),
            });
        }
        Ok(pred.iter().zip(targets).map(|(p, t)| loss.value(p - t)).sum::<f64>() / pred.len() as f64)
    }

    fn forward_sample(&self, x: &[f64], cache: &mut SampleCache) -> f64 {
        cache.prepare(self);
        cache.dense_input.clear();
        if self.kind == NetworkKind::Lstm && !self.lstm.is_empty() {
            for (l, layer) in self.lstm.iter().enumerate() {
                let (below, rest) = cache.lstm.split_at_mut(l);
                let steps = &mut rest[0];
                let zeros = &cache.zero_state[l];
                for t in 0..self.lookback {
                    let x_t: &[f64] = if l == 0 {
                        &x[t * self.n_inputs..(t + 1) * self.n_inputs]
                    } else {
                        &below[l - 1][t].h
                    };
                    let (prev, cur) = steps.split_at_mut(t);
                    let (h_prev, c_prev) = match prev.last() {
                        Some(p) => (&p.h[..], &p.c[..]),
                        None => (&zeros[..], &zeros[..]),
                    };
                    layer.step_cached(h_prev, c_prev, x_t, &mut cur[0]);
                }
            }
            let top = &cache.lstm[self.lstm.len() - 1][self.lookback - 1].h;
            cache.dense_input.extend_from_slice(top);
        } else {
            cache.dense_input.extend_from_slice(&x[x.len() - self.n_inputs..]);
        }
        for (l, layer) in self.dense.iter().enumerate() {
            let (done, rest) = cache.dense_out.split_at_mut(l);
            let layer_in: &[f64] = if l == 0 { &cache.dense_input } else { &done[l - 1] };
            layer.forward_into(layer_in, &mut cache.dense_pre[l], &mut rest[0]);
        }
        cache.dense_out.last().expect("output layer")[0]
    }

    fn backward_sample(&self, cache: &mut SampleCache, d_y: f64, grads: &mut Gradients) {
        let n_lstm = self.lstm.len();
        let mut d_out = vec![d_y];
        for l in (0..self.dense.len()).rev() {
            let layer = &self.dense[l];
            let layer_in: &[f64] = if l == 0 {
                &cache.dense_input
            } else {
                &cache.dense_out[l - 1]
            };
            let gi = 2 * (n_lstm + l);
            let (gw, gb) = grads.0[gi..gi + 2].split_at_mut(1);
            let mut dz = vec![0.0; layer.outputs];
            let needs_input = l > 0 || n_lstm > 0;
            let mut d_in = vec![0.0; if needs_input { layer.inputs } else { 0 }];
            layer.backward(
                layer_in,
                &cache.dense_pre[l],
                &d_out,
                &mut dz,
                &mut gw[0],
                &mut gb[0],
                needs_input.then_some(&mut d_in[..]),
            );
            d_out = d_in;
        }
        if n_lstm == 0 {
            return;
        }
        // d_out is now the gradient w.r.t. the last hidden state of the top layer.
        let s = self.lookback;
        let mut d_h: Vec<Vec<f64>> = (0..s).map(|_| vec![0.0; self.lstm[n_lstm - 1].units]).collect();
        d_h[s - 1] = d_out;
        for l in (0..n_lstm).rev() {
            let layer = &self.lstm[l];
            let mut d_x: Vec<Vec<f64>> = (0..s).map(|_| vec![0.0; layer.inputs]).collect();
            let (gw, gb) = grads.0[2 * l..2 * l + 2].split_at_mut(1);
            layer.backward_sequence(
                &cache.lstm[l],
                &d_h,
                &mut gw[0],
                &mut gb[0],
                &mut d_x,
                &mut cache.scratch,
            );
            d_h = d_x;
        }
    }
}

#[derive(Debug, Default)]
struct SampleCache {
    lstm: Vec<Vec<StepCache>>,
    zero_state: Vec<Vec<f64>>,
    dense_input: Vec<f64>,
    dense_pre: Vec<Vec<f64>>,
    dense_out: Vec<Vec<f64>>,
    scratch: LstmScratch,
}

impl SampleCache {
    fn prepare(&mut self, net: &Network) {
        if self.dense_pre.len() == net.dense.len() && self.lstm.len() == net.lstm.len() {
            return;
        }
        self.lstm = net
            .lstm
            .iter()
            .map(|_| vec![StepCache::default(); net.lookback])
            .collect();
        self.zero_state = net.lstm.iter().map(|l| vec![0.0; l.units]).collect();
        self.dense_pre = net.dense.iter().map(|l| vec![0.0; l.outputs]).collect();
        self.dense_out = net.dense.iter().map(|l| vec![0.0; l.outputs]).collect();
    }
}
