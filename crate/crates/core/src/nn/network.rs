use rand::Rng;

use ndarray::Array2;

use super::batch::{BatchMask, BatchPass, BatchRecord};
use super::{dot, sigmoid, ActivationKind, GradientSet, LossKind, NnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major, shape `(out_dim, in_dim)`.
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    activation: ActivationKind,
}

impl DenseLayer {
    /// Layer from explicit parameters. Zero-bias layers must be given an all-zero bias.
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: ActivationKind,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(NnError::DimensionMismatch {
                what: "weight count",
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(NnError::DimensionMismatch {
                what: "bias length",
                expected: out_dim,
                got: bias.len(),
            });
        }
        if !activation.has_trainable_bias() && bias.iter().any(|b| *b != 0.0) {
            return Err(NnError::InvalidLayout("zero-bias layer with nonzero bias".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Mutable weights, for tests and state loading.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Mutable bias. Empty slice for zero-bias layers so the pinned zeros
    /// cannot be disturbed.
    pub fn bias_mut(&mut self) -> &mut [f64] {
        if self.activation.has_trainable_bias() {
            &mut self.bias
        } else {
            &mut []
        }
    }

    fn trainable_parameters(&self) -> usize {
        self.weights.len()
            + if self.activation.has_trainable_bias() {
                self.bias.len()
            } else {
                0
            }
    }
}

/// Keep/drop pattern for one hidden layer. Kept units are scaled by
/// `1 / (1 - rate)` (inverted dropout).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    gain: f64,
}

impl DropoutMask {
    pub fn new(keep: Vec<bool>, rate: f64) -> Self {
        Self {
            keep,
            gain: 1.0 / (1.0 - rate),
        }
    }

    /// Bernoulli mask: each unit is dropped independently with probability `rate`.
    pub fn sample<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Self {
        let keep = (0..len).map(|_| rng.random::<f64>() >= rate).collect();
        Self::new(keep, rate)
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }
}

/// What one layer produced during a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    /// Nonlinearity output before dropout. Zero for dropped units, which are
    /// never evaluated.
    pub activation: Vec<f64>,
    /// Values handed to the next layer (equal to `activation` when unmasked).
    pub output: Vec<f64>,
    /// Inverted-dropout gain applied to kept units (1 when unmasked).
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub input: Vec<f64>,
    pub layers: Vec<LayerRecord>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        &self.layers.last().expect("network has layers").output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Builds a network with weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// and all biases zero.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[ActivationKind],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(NnError::InvalidLayout(
                "need at least input and output dims".into(),
            ));
        }
        if activations.len() != dims.len() - 1 {
            return Err(NnError::DimensionMismatch {
                what: "activation count",
                expected: dims.len() - 1,
                got: activations.len(),
            });
        }
        if dims.contains(&0) {
            return Err(NnError::InvalidLayout("layer dims must be >= 1".into()));
        }
        if let Some(k) = activations[..activations.len() - 1]
            .iter()
            .position(|a| *a == ActivationKind::SoftmaxZeroBias)
        {
            return Err(NnError::InvalidLayout(format!(
                "softmax allowed only on the last layer, found at layer {k}"
            )));
        }

        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (in_dim, out_dim) = (w[0], w[1]);
                let limit = 1.0 / (in_dim as f64).sqrt();
                let weights = (0..in_dim * out_dim)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect();
                DenseLayer {
                    in_dim,
                    out_dim,
                    weights,
                    bias: vec![0.0; out_dim],
                    activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Assembles a network from prebuilt layers, checking that they chain.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let n = self.layers.len();
        if n == 0 {
            return Err(NnError::InvalidLayout("no layers".into()));
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(NnError::InvalidLayout(format!(
                    "layer {k} outputs {} but layer {} takes {}",
                    pair[0].out_dim,
                    k + 1,
                    pair[1].in_dim
                )));
            }
            if pair[0].activation == ActivationKind::SoftmaxZeroBias {
                return Err(NnError::InvalidLayout(
                    "softmax allowed only on the last layer".into(),
                ));
            }
        }
        if !self.is_finite() {
            return Err(NnError::NonFinite("network parameters"));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn head(&self) -> ActivationKind {
        self.layers[self.layers.len() - 1].activation
    }

    /// Number of parameters an update may change (frozen biases excluded).
    pub fn trainable_parameters(&self) -> usize {
        self.layers.iter().map(DenseLayer::trainable_parameters).sum()
    }

    /// Widths of the hidden layers, i.e. the layers dropout masks apply to.
    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.out_dim)
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Forward pass recording every layer's output. With `masks`, dropped hidden
    /// units output 0 and kept ones are scaled by `1 / (1 - rate)`.
    pub fn forward(&self, input: &[f64], masks: Option<&[DropoutMask]>) -> Result<ForwardPass> {
        let batch_masks: Option<Vec<BatchMask>> =
            masks.map(|ms| ms.iter().map(|m| BatchMask::stack(std::slice::from_ref(m))).collect());
        let pass = self.forward_batch(row(input), batch_masks.as_deref())?;
        Ok(ForwardPass {
            input: input.to_vec(),
            layers: pass
                .layers
                .into_iter()
                .map(|r| LayerRecord {
                    activation: r.activation.into_iter().collect(),
                    output: r.output.into_iter().collect(),
                    gain: r.gain,
                })
                .collect(),
        })
    }

    /// Unmasked forward pass returning only the final output.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(row(input))?.into_iter().collect())
    }

    /// Loss of the unmasked network on one example. Cross-entropy is computed
    /// through log-sum-exp so it stays accurate for finite differencing.
    pub fn loss(&self, input: &[f64], target: &[f64], loss: LossKind) -> Result<f64> {
        self.check_loss(target, loss)?;
        let last = self.layers.len() - 1;
        let pass = if last == 0 {
            None
        } else {
            Some(Mlp {
                layers: self.layers[..last].to_vec(),
            }
            .forward(input, None)?)
        };
        let x: &[f64] = match &pass {
            Some(p) => p.output(),
            None => {
                if input.len() != self.input_dim() {
                    return Err(NnError::DimensionMismatch {
                        what: "input length",
                        expected: self.input_dim(),
                        got: input.len(),
                    });
                }
                input
            }
        };
        let head = &self.layers[last];
        let z: Vec<f64> = (0..head.out_dim)
            .map(|i| dot(&head.weights[i * head.in_dim..(i + 1) * head.in_dim], x) + head.bias[i])
            .collect();
        let value = match loss {
            LossKind::CrossEntropy => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                z.iter().zip(target).map(|(zi, ti)| ti * (lse - zi)).sum()
            }
            LossKind::SumSquared => {
                0.5 * z
                    .iter()
                    .zip(target)
                    .map(|(zi, ti)| {
                        let d = sigmoid(*zi) - ti;
                        d * d
                    })
                    .sum::<f64>()
            }
        };
        Ok(value)
    }

    pub(crate) fn check_loss_head(&self, loss: LossKind) -> Result<()> {
        if !loss.matches_head(self.head()) {
            return Err(NnError::LossHeadMismatch {
                loss,
                head: self.head(),
            });
        }
        Ok(())
    }

    fn check_loss(&self, target: &[f64], loss: LossKind) -> Result<()> {
        self.check_loss_head(loss)?;
        if target.len() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                what: "target length",
                expected: self.output_dim(),
                got: target.len(),
            });
        }
        Ok(())
    }

    /// Exact gradient of `loss` for the example recorded in `pass`. Dropout
    /// masks are carried by the pass itself.
    pub fn backward(&self, pass: &ForwardPass, target: &[f64], loss: LossKind) -> Result<GradientSet> {
        self.check_loss(target, loss)?;
        if pass.layers.len() != self.layers.len() {
            return Err(NnError::DimensionMismatch {
                what: "forward record layers",
                expected: self.layers.len(),
                got: pass.layers.len(),
            });
        }
        let batch = BatchPass {
            input: row(&pass.input),
            layers: pass
                .layers
                .iter()
                .map(|r| BatchRecord {
                    activation: row(&r.activation),
                    output: row(&r.output),
                    gain: r.gain,
                })
                .collect(),
        };
        let mut grads = GradientSet::zeros_like(self);
        self.accumulate_batch(&batch, row(target).view(), loss, &mut grads)?;
        Ok(grads)
    }
}

fn row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("1 x n")
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
