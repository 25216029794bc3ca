use super::{GradientSet, LossKind, Mlp, Result};

/// Central-difference estimate `(L(w + eps) - L(w - eps)) / 2 eps` for every
/// trainable parameter, without dither or dropout. Costs two forward passes per
/// parameter; meant for small test networks.
pub fn finite_difference_gradient(
    net: &Mlp,
    input: &[f64],
    target: &[f64],
    loss: LossKind,
    eps: f64,
) -> Result<GradientSet> {
    let mut grads = GradientSet::zeros_like(net);
    let mut probe = net.clone();

    for k in 0..net.layers().len() {
        let layer = &net.layers()[k];
        for (i, &w) in layer.weights().iter().enumerate() {
            let mut eval = |v: f64| {
                probe.layers_mut()[k].weights[i] = v;
                probe.loss(input, target, loss)
            };
            let (up, down) = (eval(w + eps)?, eval(w - eps)?);
            probe.layers_mut()[k].weights[i] = w;
            grads.layers[k].weights[i] = (up - down) / (2.0 * eps);
        }
        if layer.activation().has_trainable_bias() {
            for (i, &b) in layer.bias().iter().enumerate() {
                let mut eval = |v: f64| {
                    probe.layers_mut()[k].bias[i] = v;
                    probe.loss(input, target, loss)
                };
                let (up, down) = (eval(b + eps)?, eval(b - eps)?);
                probe.layers_mut()[k].bias[i] = b;
                grads.layers[k].bias[i] = (up - down) / (2.0 * eps);
            }
        }
    }
    Ok(grads)
}
