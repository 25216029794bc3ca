//! The perpetual learning machine.
//!
//! A storage network learns image to class, a recall network learns class to
//! image. After an initial supervised phase the training images are dropped
//! and the pair keeps training on its own output: each perpetual SGD step
//! picks a random class, recalls an image for it and trains both networks on
//! that pair. New classes are taught by slipping real examples into the loop.

mod config;
mod machine;
mod metrics;
mod schedule;

pub use config::{Phase, ScheduleConfig, DEFAULT_LEARNING_RATE, DEFAULT_RECALL_LEARNING_RATE,
    DEFAULT_RECALL_REPLAY_LEARNING_RATE};
pub use machine::{injection_step, one_hot, psgd_iteration, train_initial, Plm, Streams};
pub use metrics::{evaluate, weighted_all, ErrorRates, MetricsRow, MetricsSink, NullSink};
pub use schedule::{run_ablation, run_experiment, run_schedule, RunOptions, RunReport};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config field {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("class {class} out of range (n_classes = {n_classes})")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("network error: {0}")]
    Network(#[from] NnError),
    #[error("numeric explosion in {network} network{}{}: {source}",
        .phase.map(|p| format!(" during {p}")).unwrap_or_default(),
        .iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default())]
    NumericExplosion {
        network: &'static str,
        phase: Option<Phase>,
        iteration: Option<usize>,
        source: NnError,
    },
    #[error("metrics sink failed: {0}")]
    Sink(#[source] std::io::Error),
}

impl EngineError {
    pub(crate) fn explosion(network: &'static str, source: NnError) -> Self {
        EngineError::NumericExplosion {
            network,
            phase: None,
            iteration: None,
            source,
        }
    }

    pub fn is_explosion(&self) -> bool {
        matches!(self, EngineError::NumericExplosion { .. })
    }

    /// PSGD iteration at which the run blew up, if this is a blow-up.
    pub fn iteration(&self) -> Option<usize> {
        match self {
            EngineError::NumericExplosion { iteration, .. } => *iteration,
            _ => None,
        }
    }

    pub(crate) fn in_phase(mut self, p: Phase) -> Self {
        if let EngineError::NumericExplosion { phase, .. } = &mut self {
            phase.get_or_insert(p);
        }
        self
    }

    pub(crate) fn at_iteration(mut self, i: usize) -> Self {
        if let EngineError::NumericExplosion { iteration, .. } = &mut self {
            iteration.get_or_insert(i);
        }
        self
    }
}
