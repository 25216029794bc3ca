//! Row-batched forward and backward passes.
//!
//! Every pass through a network goes through here: a single example is a
//! batch of one, and the dither replicas of one training example are a batch
//! of `replicas`. Each layer is one matrix product, so the replica reduction
//! happens inside the GEMM in a fixed order.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};

use super::{sigmoid, ActivationKind, DenseLayer, DropoutMask, GradientSet, LossKind, Mlp, NnError, Result};

/// Dropout pattern for one hidden layer across a batch, shape `(rows, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchMask {
    keep: Array2<bool>,
    gain: f64,
}

impl BatchMask {
    /// Stacks per-row masks that share one dropout rate.
    pub fn stack(rows: &[DropoutMask]) -> Self {
        let width = rows.first().map_or(0, DropoutMask::len);
        let gain = rows.first().map_or(1.0, DropoutMask::gain);
        let keep = Array2::from_shape_fn((rows.len(), width), |(r, c)| rows[r].keep()[c]);
        Self { keep, gain }
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn keep(&self) -> ArrayView2<'_, bool> {
        self.keep.view()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    /// Nonlinearity output, zeroed for dropped units.
    pub activation: Array2<f64>,
    /// What the next layer sees: `activation * gain` under dropout.
    pub output: Array2<f64>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchPass {
    pub input: Array2<f64>,
    pub layers: Vec<BatchRecord>,
}

impl BatchPass {
    pub fn output(&self) -> &Array2<f64> {
        &self.layers.last().expect("network has layers").output
    }
}

impl DenseLayer {
    pub(crate) fn weight_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.out_dim(), self.in_dim()), &self.weights).expect("weights sized out x in")
    }

    fn forward_batch(&self, x: &Array2<f64>, mask: Option<&BatchMask>) -> BatchRecord {
        let mut z = Array2::<f64>::zeros((x.nrows(), self.out_dim()));
        general_mat_mul(1.0, x, &self.weight_view().t(), 0.0, &mut z);
        match self.activation() {
            ActivationKind::SoftmaxZeroBias => {
                for mut row in z.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |m, v| m.max(*v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let total = row.sum();
                    row.mapv_inplace(|v| v / total);
                }
                BatchRecord {
                    activation: z.clone(),
                    output: z,
                    gain: 1.0,
                }
            }
            ActivationKind::BiasedSigmoid | ActivationKind::SigmoidZeroBias => {
                z += &ArrayView1::from(&self.bias[..]);
                z.mapv_inplace(sigmoid);
                match mask {
                    None => BatchRecord {
                        output: z.clone(),
                        activation: z,
                        gain: 1.0,
                    },
                    Some(m) => {
                        let mut output = Array2::<f64>::zeros(z.raw_dim());
                        Zip::from(&mut z)
                            .and(&mut output)
                            .and(&m.keep)
                            .for_each(|a, o, &keep| {
                                if keep {
                                    *o = *a * m.gain;
                                } else {
                                    *a = 0.0;
                                }
                            });
                        BatchRecord {
                            activation: z,
                            output,
                            gain: m.gain,
                        }
                    }
                }
            }
        }
    }
}

impl Mlp {
    /// Forward pass over the rows of `input`.
    pub fn forward_batch(&self, input: Array2<f64>, masks: Option<&[BatchMask]>) -> Result<BatchPass> {
        if input.ncols() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                what: "input length",
                expected: self.input_dim(),
                got: input.ncols(),
            });
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite("input"));
        }
        let hidden = self.layers().len() - 1;
        if let Some(masks) = masks {
            if masks.len() != hidden {
                return Err(NnError::DimensionMismatch {
                    what: "mask count",
                    expected: hidden,
                    got: masks.len(),
                });
            }
            for (m, l) in masks.iter().zip(self.layers()) {
                if m.keep.dim() != (input.nrows(), l.out_dim()) {
                    return Err(NnError::DimensionMismatch {
                        what: "mask length",
                        expected: l.out_dim(),
                        got: m.keep.ncols(),
                    });
                }
            }
        }

        let mut records: Vec<BatchRecord> = Vec::with_capacity(self.layers().len());
        for (k, layer) in self.layers().iter().enumerate() {
            let x = records.last().map_or(&input, |r| &r.output);
            let record = layer.forward_batch(x, masks.and_then(|m| m.get(k)));
            records.push(record);
        }
        Ok(BatchPass { input, layers: records })
    }

    /// Unmasked outputs for each row of `input`.
    pub fn predict_batch(&self, input: Array2<f64>) -> Result<Array2<f64>> {
        let mut pass = self.forward_batch(input, None)?;
        Ok(pass.layers.pop().expect("network has layers").output)
    }

    /// Adds the summed (not averaged) gradient over all rows of `pass` into `acc`.
    /// `targets` has one row per batch row; a broadcast view works.
    pub(crate) fn accumulate_batch(
        &self,
        pass: &BatchPass,
        targets: ArrayView2<'_, f64>,
        loss: LossKind,
        acc: &mut GradientSet,
    ) -> Result<()> {
        self.check_loss_head(loss)?;
        let y = pass.output();
        if targets.dim() != y.dim() {
            return Err(NnError::DimensionMismatch {
                what: "target length",
                expected: y.ncols(),
                got: targets.ncols(),
            });
        }
        if pass.layers.len() != self.layers().len() {
            return Err(NnError::DimensionMismatch {
                what: "forward record layers",
                expected: self.layers().len(),
                got: pass.layers.len(),
            });
        }

        let mut delta: Array2<f64> = match loss {
            LossKind::CrossEntropy => {
                let mass: Array1<f64> = targets.sum_axis(Axis(1));
                let mut d = Array2::zeros(y.raw_dim());
                Zip::from(d.rows_mut())
                    .and(y.rows())
                    .and(targets.rows())
                    .and(&mass)
                    .for_each(|mut d, y, t, &m| {
                        Zip::from(&mut d).and(&y).and(&t).for_each(|d, &y, &t| *d = y * m - t);
                    });
                d
            }
            LossKind::SumSquared => {
                let mut d = Array2::zeros(y.raw_dim());
                Zip::from(&mut d)
                    .and(y)
                    .and(&targets)
                    .for_each(|d, &y, &t| *d = (y - t) * y * (1.0 - y));
                d
            }
        };

        for k in (0..self.layers().len()).rev() {
            let layer = &self.layers()[k];
            let x = if k == 0 { &pass.input } else { &pass.layers[k - 1].output };
            let g = &mut acc.layers[k];
            let mut gw = ArrayViewMut2::from_shape((layer.out_dim(), layer.in_dim()), &mut g.weights)
                .expect("gradient congruent with layer");
            general_mat_mul(1.0, &delta.t(), x, 1.0, &mut gw);
            if layer.activation().has_trainable_bias() {
                for row in delta.rows() {
                    for (b, d) in g.bias.iter_mut().zip(row) {
                        *b += d;
                    }
                }
            }
            if k == 0 {
                break;
            }

            let prev = &pass.layers[k - 1];
            let mut back = Array2::<f64>::zeros((delta.nrows(), layer.in_dim()));
            general_mat_mul(1.0, &delta, &layer.weight_view(), 0.0, &mut back);
            let gain = prev.gain;
            Zip::from(&mut back)
                .and(&prev.activation)
                .for_each(|b, &a| *b *= gain * a * (1.0 - a));
            delta = back;
        }
        Ok(())
    }
}
