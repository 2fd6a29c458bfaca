use super::dense::Activation;
use super::network::{Loss, Network};
use crate::error::Result;
use crate::timeseries::Matrix;

/// Largest disagreement between the analytic gradient of the mean squared
/// error and central finite differences with step `h`, measured per
/// parameter as `|ga - gn| / max(1, |ga|, |gn|)`.
pub fn gradient_check(network: &Network, samples: &Matrix, targets: &[f64], h: f64) -> Result<f64> {
    let all: Vec<usize> = (0..samples.rows()).collect();
    let (_, analytic) = network.loss_and_gradient(samples, targets, &all, Loss::Mse)?;
    let mut probe = network.clone();
    let mut worst = 0.0f64;
    for (s, grads) in analytic.0.iter().enumerate() {
        for (k, &ga) in grads.iter().enumerate() {
            let original = probe.param_slices()[s][k];
            probe.param_slices_mut()[s][k] = original + h;
            let up = probe.loss(samples, targets, Loss::Mse)?;
            probe.param_slices_mut()[s][k] = original - h;
            let down = probe.loss(samples, targets, Loss::Mse)?;
            probe.param_slices_mut()[s][k] = original;
            let gn = (up - down) / (2.0 * h);
            let err = (ga - gn).abs() / 1f64.max(ga.abs()).max(gn.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Smallest `|z|` over the ReLU pre-activations of every sample; infinite
/// when the network has no ReLU unit.
///
/// Central differences straddle the ReLU kink when a pre-activation lies
/// within about `h` of zero, so a gradient check is only meaningful when
/// this margin is well above the step.
pub fn relu_margin(network: &Network, samples: &Matrix) -> Result<f64> {
    network.forward(samples)?;
    if network.kind != super::NetworkKind::Ffnn {
        return Ok(f64::INFINITY);
    }
    let mut margin = f64::INFINITY;
    for row in samples.iter_rows() {
        let mut x = row.to_vec();
        for layer in &network.dense {
            let mut pre = vec![0.0; layer.outputs];
            let mut out = vec![0.0; layer.outputs];
            layer.forward_into(&x, &mut pre, &mut out);
            if layer.activation == Activation::Relu {
                margin = pre.iter().fold(margin, |m, z| m.min(z.abs()));
            }
            x = out;
        }
    }
    Ok(margin)
}
