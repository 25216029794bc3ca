//! A perpetual learning machine on MNIST.
//!
//! - [`nn`]: dense sigmoid/softmax networks, backprop, and the parallel
//!   dither + dropout gradient.
//! - [`mnist`]: IDX parsing and the 75-image arbitrary-class dataset.
//! - [`engine`]: the storage/recall pair, perpetual SGD, on-the-fly
//!   injection and per-iteration evaluation.

pub mod engine;
pub mod mnist;
pub mod nn;
pub mod rng;

pub use engine::{
    evaluate, run_ablation, run_experiment, run_schedule, EngineError, ErrorRates, MetricsRow, MetricsSink,
    Phase, Plm, RunOptions, RunReport, ScheduleConfig,
};
pub use mnist::{parse_idx_images, parse_idx_labels, DataError, Dataset, Example, RawImage, Split};
pub use nn::{
    finite_difference_gradient, regularized_gradient, ActivationKind, DitherDist, GradientSet, LossKind, Mlp,
    NnError, RegularizerSpec,
};
pub use rng::RngStream;
