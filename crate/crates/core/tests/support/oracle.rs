//! Independent gradient oracle: a loop-based forward pass and loss, and
//! central differences over it. Shared by the gradient tests and the
//! acceptance suite.

use plm_core::nn::DenseLayer;
use plm_core::{ActivationKind, GradientSet, LossKind, Mlp, RngStream};
use rand::Rng;

pub fn reference_loss(layers: &[DenseLayer], input: &[f64], target: &[f64], loss: LossKind) -> f64 {
    let mut x = input.to_vec();
    for layer in layers {
        let (n_in, n_out) = (layer.in_dim(), layer.out_dim());
        let mut z = vec![0.0; n_out];
        for o in 0..n_out {
            let mut s = layer.bias()[o];
            for i in 0..n_in {
                s += layer.weights()[o * n_in + i] * x[i];
            }
            z[o] = s;
        }
        x = match layer.activation() {
            ActivationKind::SoftmaxZeroBias => {
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
            _ => z.into_iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
        };
    }
    match loss {
        LossKind::CrossEntropy => -x.iter().zip(target).map(|(y, t)| t * y.ln()).sum::<f64>(),
        LossKind::SumSquared => 0.5 * x.iter().zip(target).map(|(y, t)| (y - t) * (y - t)).sum::<f64>(),
    }
}

/// Central differences of [`reference_loss`], one parameter at a time.
pub fn oracle_gradient(net: &Mlp, input: &[f64], target: &[f64], loss: LossKind, eps: f64) -> Vec<f64> {
    let mut probe = net.clone();
    let mut out = Vec::new();
    for k in 0..net.layers().len() {
        for i in 0..net.layers()[k].weights().len() {
            let w = net.layers()[k].weights()[i];
            probe.layers_mut()[k].weights_mut()[i] = w + eps;
            let up = reference_loss(probe.layers(), input, target, loss);
            probe.layers_mut()[k].weights_mut()[i] = w - eps;
            let down = reference_loss(probe.layers(), input, target, loss);
            probe.layers_mut()[k].weights_mut()[i] = w;
            out.push((up - down) / (2.0 * eps));
        }
        let trainable = if net.layers()[k].activation().has_trainable_bias() { net.layers()[k].bias().len() } else { 0 };
        for i in 0..trainable {
            let b = net.layers()[k].bias()[i];
            probe.layers_mut()[k].bias_mut()[i] = b + eps;
            let up = reference_loss(probe.layers(), input, target, loss);
            probe.layers_mut()[k].bias_mut()[i] = b - eps;
            let down = reference_loss(probe.layers(), input, target, loss);
            probe.layers_mut()[k].bias_mut()[i] = b;
            out.push((up - down) / (2.0 * eps));
        }
    }
    out
}

/// Flattens a gradient set in the same order as [`oracle_gradient`], skipping
/// frozen biases.
pub fn flatten(net: &Mlp, g: &GradientSet) -> Vec<f64> {
    let mut out = Vec::new();
    for (layer, lg) in net.layers().iter().zip(&g.layers) {
        out.extend_from_slice(&lg.weights);
        if layer.activation().has_trainable_bias() {
            out.extend_from_slice(&lg.bias);
        }
    }
    out
}

pub struct Case {
    pub net: Mlp,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub loss: LossKind,
}

pub fn random_case(seed: u64, loss: LossKind) -> Case {
    let mut rng = RngStream::new(seed);
    let dims = [rng.random_range(1..=6), rng.random_range(1..=5), rng.random_range(1..=4)];
    let head = match loss {
        LossKind::CrossEntropy => ActivationKind::SoftmaxZeroBias,
        LossKind::SumSquared => ActivationKind::SigmoidZeroBias,
    };
    let mut net = Mlp::init(&dims, &[ActivationKind::BiasedSigmoid, head], &mut rng).unwrap();
    for b in net.layers_mut()[0].bias_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let input = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let target = match loss {
        LossKind::CrossEntropy => {
            let mut t = vec![0.0; dims[2]];
            t[rng.random_range(0..dims[2])] = 1.0;
            t
        }
        LossKind::SumSquared => (0..dims[2]).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    Case { net, input, target, loss }
}

pub fn cases() -> Vec<Case> {
    (0..10u64)
        .map(|s| random_case(1000 + s, if s % 2 == 0 { LossKind::CrossEntropy } else { LossKind::SumSquared }))
        .collect()
}

pub fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-7 || diff <= 1e-5 * analytic.abs().max(numeric.abs())
}
