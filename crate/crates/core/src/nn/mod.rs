//! Dense feed-forward networks with a single trainer: non-batch SGD on a
//! gradient averaged over dithered, dropout-masked replicas of one example.
//!
//! Weights are `f64`, stored row-major with shape `(out_dim, in_dim)`.

mod batch;
mod gradcheck;
mod gradient;
mod network;
mod regularize;

pub use batch::{BatchMask, BatchPass, BatchRecord};
pub use gradcheck::finite_difference_gradient;
pub use gradient::{GradientSet, LayerGradient};
pub use network::{argmax, DenseLayer, DropoutMask, ForwardPass, LayerRecord, Mlp};
pub use regularize::{regularized_gradient, DitherDist, RegularizerSpec};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid network layout: {0}")]
    InvalidLayout(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("loss {loss:?} does not match head activation {head:?}")]
    LossHeadMismatch {
        loss: LossKind,
        head: ActivationKind,
    },
    #[error("learning rate must be finite and non-negative, got {0}")]
    InvalidLearningRate(f64),
    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Per-layer nonlinearity. The `ZeroBias` kinds carry a bias vector pinned at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    /// Logistic sigmoid with a trainable per-unit bias.
    BiasedSigmoid,
    SigmoidZeroBias,
    SoftmaxZeroBias,
}

impl ActivationKind {
    pub fn has_trainable_bias(self) -> bool {
        matches!(self, ActivationKind::BiasedSigmoid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `-sum t_i ln y_i`; pairs with a softmax head.
    CrossEntropy,
    /// `0.5 * sum (y_i - t_i)^2`; pairs with a sigmoid head.
    SumSquared,
}

impl LossKind {
    pub fn matches_head(self, head: ActivationKind) -> bool {
        matches!(
            (self, head),
            (LossKind::CrossEntropy, ActivationKind::SoftmaxZeroBias)
                | (LossKind::SumSquared, ActivationKind::SigmoidZeroBias)
        )
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible bit for bit.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}
