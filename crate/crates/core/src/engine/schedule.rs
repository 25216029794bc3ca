use rand::Rng;

use std::time::{Duration, Instant};

use super::metrics::{evaluate, ErrorRates, MetricsRow, MetricsSink};
use super::{injection_step, psgd_iteration, train_initial, EngineError, Phase, Plm, ScheduleConfig, Streams};
use crate::mnist::Dataset;
use crate::nn::RegularizerSpec;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Regularizer for the PSGD and injection steps. Initial training always
    /// uses `config.regularizer`.
    pub psgd_regularizer: RegularizerSpec,
    /// Stop quietly at the first numeric blow-up and report it instead of
    /// returning an error.
    pub tolerate_explosion: bool,
}

impl RunOptions {
    pub fn standard(config: &ScheduleConfig) -> Self {
        Self {
            psgd_regularizer: config.regularizer,
            tolerate_explosion: false,
        }
    }

    /// Unregularized PSGD: one clean replica, no dither, no dropout.
    pub fn ablation() -> Self {
        Self {
            psgd_regularizer: RegularizerSpec::none(),
            tolerate_explosion: true,
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub plm: Plm,
    /// Injection steps taken in Homeostasis1, OnTheFly and Homeostasis2.
    pub injections: [usize; 3],
    /// How often PSGD drew each class.
    pub class_draws: Vec<usize>,
    /// Set when a tolerated blow-up ended the run early.
    pub explosion: Option<EngineError>,
    /// Error rates right after initial training, before any PSGD.
    pub initial_errors: Option<ErrorRates>,
    /// Wall-clock time of initial training.
    pub initial_duration: Duration,
}

/// Builds the pair, trains it on the TRAIN split, then runs the PSGD phases,
/// feeding a row to `sink` after every `eval_every`-th iteration.
pub fn run_experiment(
    config: &ScheduleConfig,
    dataset: &Dataset,
    sink: impl MetricsSink,
) -> Result<Plm, EngineError> {
    run_schedule(config, dataset, &RunOptions::standard(config), sink).map(|r| r.plm)
}

/// Same schedule with PSGD unregularized after a regular initial training.
pub fn run_ablation(
    config: &ScheduleConfig,
    dataset: &Dataset,
    sink: impl MetricsSink,
) -> Result<RunReport, EngineError> {
    run_schedule(config, dataset, &RunOptions::ablation(), sink)
}

pub fn run_schedule(
    config: &ScheduleConfig,
    dataset: &Dataset,
    options: &RunOptions,
    mut sink: impl MetricsSink,
) -> Result<RunReport, EngineError> {
    config.validate()?;
    options
        .psgd_regularizer
        .validate()
        .map_err(|e| EngineError::InvalidConfig { field: "regularizer", reason: e.to_string() })?;
    if dataset.n_train() != config.n_train || dataset.n_new() != config.n_new {
        return Err(EngineError::InvalidConfig {
            field: "n_train",
            reason: format!(
                "dataset has {}+{} examples, config wants {}+{}",
                dataset.n_train(),
                dataset.n_new(),
                config.n_train,
                config.n_new
            ),
        });
    }
    let pixels = dataset.examples()[0].image.len();
    let root = RngStream::new(config.seed);
    let mut plm = Plm::build(pixels, config, dataset.mean(), &root)?;
    let mut streams = Streams::new(&root);

    let started = Instant::now();
    let initial = train_initial(&mut plm, dataset.train(), config, &mut streams);
    let initial_duration = started.elapsed();
    let mut report = RunReport {
        initial_errors: initial.is_ok().then(|| evaluate(&plm, dataset)),
        plm,
        injections: [0; 3],
        class_draws: vec![0; config.n_classes],
        explosion: None,
        initial_duration,
    };
    if let Err(e) = initial {
        if options.tolerate_explosion && e.is_explosion() {
            report.explosion = Some(e);
            return Ok(report);
        }
        return Err(e);
    }

    // From here on only the NEW split feeds training; `dataset` is used for
    // measurement alone.
    let pool = dataset.new_examples();

    for iteration in 1..=config.psgd_iterations() {
        let phase = config.phase_of(iteration).expect("iteration within schedule");
        let step = psgd_step(&mut report, config, options, phase, pool, &mut streams);
        if let Err(e) = step {
            let e = e.in_phase(phase).at_iteration(iteration);
            if options.tolerate_explosion && e.is_explosion() {
                report.explosion = Some(e);
                break;
            }
            return Err(e);
        }
        if iteration % config.eval_every == 0 {
            let row = MetricsRow {
                iteration,
                phase,
                errors: evaluate(&report.plm, dataset),
            };
            sink.record(&row).map_err(EngineError::Sink)?;
        }
    }
    Ok(report)
}

fn psgd_step(
    report: &mut RunReport,
    config: &ScheduleConfig,
    options: &RunOptions,
    phase: Phase,
    pool: &[crate::mnist::Example],
    streams: &mut Streams,
) -> Result<(), EngineError> {
    let reg = &options.psgd_regularizer;
    let class = psgd_iteration(&mut report.plm, config, reg, streams)?;
    report.class_draws[class] += 1;
    if phase == Phase::OnTheFly && !pool.is_empty() {
        let pick = streams.injection_draw.random_range(0..pool.len());
        injection_step(&mut report.plm, &pool[pick], config, reg, streams)?;
        report.injections[1] += 1;
    }
    Ok(())
}
