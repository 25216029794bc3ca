use std::fmt;
use std::str::FromStr;

use super::EngineError;
use crate::nn::RegularizerSpec;

/// Stage of the experiment an iteration belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    InitialTraining,
    Homeostasis1,
    OnTheFly,
    Homeostasis2,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::InitialTraining,
        Phase::Homeostasis1,
        Phase::OnTheFly,
        Phase::Homeostasis2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::InitialTraining => "InitialTraining",
            Phase::Homeostasis1 => "Homeostasis1",
            Phase::OnTheFly => "OnTheFly",
            Phase::Homeostasis2 => "Homeostasis2",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

/// Everything that shapes one run of the machine.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    /// Full passes over the TRAIN split before PSGD starts.
    pub initial_sweeps: usize,
    pub homeostasis1_iters: usize,
    pub onthefly_iters: usize,
    pub homeostasis2_iters: usize,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_new: usize,
    pub hidden_units: usize,
    pub eval_every: usize,
    /// SGD step size for the storage network.
    pub learning_rate: f64,
    /// SGD step size for the recall network on real images: initial training
    /// and injections.
    pub recall_learning_rate: f64,
    /// SGD step size for the recall network on its own output during PSGD.
    pub recall_replay_learning_rate: f64,
    pub regularizer: RegularizerSpec,
    pub seed: u64,
}

/// Storage step size. 0.5 and below reach zero direct error after the
/// initial sweeps; 2.0 and above diverge.
pub const DEFAULT_LEARNING_RATE: f64 = 0.5;

/// Recall step size. The recall network's sigmoid head under squared error
/// learns far more slowly than the softmax classifier; at storage-sized rates
/// it has not converged after 100 sweeps.
pub const DEFAULT_RECALL_LEARNING_RATE: f64 = 5.0;

/// Recall step size when replaying its own output. Dither on the one-hot input
/// makes every replay step shrink the class-specific weights a little, so the
/// recalled images slowly merge; at 0.5 they collapse within a thousand
/// iterations once injections stop.
pub const DEFAULT_RECALL_REPLAY_LEARNING_RATE: f64 = 0.02;

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            initial_sweeps: 100,
            homeostasis1_iters: 1000,
            onthefly_iters: 2000,
            homeostasis2_iters: 2000,
            n_classes: 75,
            n_train: 50,
            n_new: 25,
            hidden_units: 100,
            eval_every: 1,
            learning_rate: DEFAULT_LEARNING_RATE,
            recall_learning_rate: DEFAULT_RECALL_LEARNING_RATE,
            recall_replay_learning_rate: DEFAULT_RECALL_REPLAY_LEARNING_RATE,
            regularizer: RegularizerSpec::default(),
            seed: 1,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |field: &'static str, reason: String| Err(EngineError::InvalidConfig { field, reason });
        if self.n_train + self.n_new != self.n_classes {
            return bad(
                "n_train",
                format!(
                    "n_train ({}) + n_new ({}) must equal n_classes ({})",
                    self.n_train, self.n_new, self.n_classes
                ),
            );
        }
        if self.n_classes == 0 {
            return bad("n_classes", "must be >= 1".into());
        }
        if self.hidden_units == 0 {
            return bad("hidden_units", "must be >= 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every", "must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate", format!("must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(self.recall_learning_rate.is_finite() && self.recall_learning_rate >= 0.0) {
            return bad(
                "recall_learning_rate",
                format!("must be finite and >= 0, got {}", self.recall_learning_rate),
            );
        }
        if !(self.recall_replay_learning_rate.is_finite() && self.recall_replay_learning_rate >= 0.0) {
            return bad(
                "recall_replay_learning_rate",
                format!("must be finite and >= 0, got {}", self.recall_replay_learning_rate),
            );
        }
        if let Err(e) = self.regularizer.validate() {
            return bad("regularizer", e.to_string());
        }
        Ok(())
    }

    pub fn psgd_iterations(&self) -> usize {
        self.homeostasis1_iters + self.onthefly_iters + self.homeostasis2_iters
    }

    /// Phase of the 1-based global PSGD iteration `iteration`.
    pub fn phase_of(&self, iteration: usize) -> Option<Phase> {
        let h1 = self.homeostasis1_iters;
        let otf = h1 + self.onthefly_iters;
        let h2 = otf + self.homeostasis2_iters;
        match iteration {
            0 => None,
            i if i <= h1 => Some(Phase::Homeostasis1),
            i if i <= otf => Some(Phase::OnTheFly),
            i if i <= h2 => Some(Phase::Homeostasis2),
            _ => None,
        }
    }
}
