//! Parallel dither with dropout.
//!
//! One training example is expanded into `replicas` copies. Each copy gets its
//! own zero-mean input noise and its own hidden-layer dropout mask, the copies
//! are back-propagated independently and their gradients averaged into a
//! single non-batch update.

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{BatchMask, DropoutMask, GradientSet, LossKind, Mlp, NnError, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DitherDist {
    /// Uniform on `[-scale/2, scale/2)`: `scale` is the peak-to-peak width.
    Uniform,
    /// Normal with standard deviation `scale`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerSpec {
    pub replicas: usize,
    pub dither_dist: DitherDist,
    pub dither_scale: f64,
    pub dropout_rate: f64,
}

impl Default for RegularizerSpec {
    /// 100 replicas, unit-width uniform dither, 50% dropout.
    fn default() -> Self {
        Self {
            replicas: 100,
            dither_dist: DitherDist::Uniform,
            dither_scale: 1.0,
            dropout_rate: 0.5,
        }
    }
}

impl RegularizerSpec {
    /// A single clean replica: plain SGD.
    pub fn none() -> Self {
        Self {
            replicas: 1,
            dither_dist: DitherDist::Uniform,
            dither_scale: 0.0,
            dropout_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(NnError::InvalidRegularizer("replicas must be >= 1".into()));
        }
        if !(self.dither_scale.is_finite() && self.dither_scale >= 0.0) {
            return Err(NnError::InvalidRegularizer(format!(
                "dither scale must be finite and >= 0, got {}",
                self.dither_scale
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::InvalidRegularizer(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// One dither sample.
    pub fn sample_dither<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.dither_dist {
            DitherDist::Uniform => (rng.random::<f64>() - 0.5) * self.dither_scale,
            DitherDist::Gaussian => rng.sample::<f64, _>(StandardNormal) * self.dither_scale,
        }
    }
}

/// Mean gradient over `spec.replicas` dithered, dropout-masked copies of one
/// example.
///
/// One value is drawn from `rng` per call; replica `k` then draws its noise and
/// masks from a sub-stream indexed by `k`. The replicas run as one batch and
/// their gradient sum is divided by the replica count.
pub fn regularized_gradient(
    net: &Mlp,
    input: &[f64],
    target: &[f64],
    loss: LossKind,
    spec: &RegularizerSpec,
    rng: &mut RngStream,
) -> Result<GradientSet> {
    spec.validate()?;
    if input.len() != net.input_dim() {
        return Err(NnError::DimensionMismatch {
            what: "input length",
            expected: net.input_dim(),
            got: input.len(),
        });
    }
    if target.len() != net.output_dim() {
        return Err(NnError::DimensionMismatch {
            what: "target length",
            expected: net.output_dim(),
            got: target.len(),
        });
    }
    let call = RngStream::new(rng.random());
    let hidden = net.hidden_dims();
    let k = spec.replicas;
    let mut inputs = Array2::<f64>::zeros((k, input.len()));
    let mut masks: Vec<Vec<DropoutMask>> = vec![Vec::with_capacity(k); hidden.len()];

    for (r, mut row) in inputs.rows_mut().into_iter().enumerate() {
        let mut sub = call.derive_indexed(r as u64);
        if spec.dither_scale > 0.0 {
            for (n, x) in row.iter_mut().zip(input) {
                *n = x + spec.sample_dither(&mut sub);
            }
        } else {
            row.assign(&ArrayView1::from(input));
        }
        if spec.dropout_rate > 0.0 {
            for (layer, &len) in masks.iter_mut().zip(&hidden) {
                layer.push(DropoutMask::sample(len, spec.dropout_rate, &mut sub));
            }
        }
    }

    let batch_masks: Option<Vec<BatchMask>> =
        (spec.dropout_rate > 0.0).then(|| masks.iter().map(|m| BatchMask::stack(m)).collect());
    let pass = net.forward_batch(inputs, batch_masks.as_deref())?;
    let target_row = ArrayView1::from(target);
    let targets = target_row
        .broadcast((k, target.len()))
        .expect("broadcast target over replicas");
    let mut acc = GradientSet::zeros_like(net);
    net.accumulate_batch(&pass, targets, loss, &mut acc)?;

    let n = spec.replicas as f64;
    for l in &mut acc.layers {
        l.weights.iter_mut().chain(&mut l.bias).for_each(|v| *v /= n);
    }
    if !acc.is_finite() {
        return Err(NnError::NonFinite("regularized gradient"));
    }
    Ok(acc)
}
