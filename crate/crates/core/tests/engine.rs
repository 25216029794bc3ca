use plm_core::engine::{injection_step, psgd_iteration, NullSink, Streams};
use plm_core::mnist::PIXELS;
use plm_core::nn::argmax;
use plm_core::{
    run_experiment, run_schedule, Dataset, EngineError, Example, MetricsRow, Phase, Plm, RawImage, RegularizerSpec,
    RngStream, RunOptions, ScheduleConfig, Split,
};

fn synthetic_images(n: usize) -> Vec<RawImage> {
    (0..n)
        .map(|i| {
            let px: Vec<u8> = (0..PIXELS)
                .map(|p| if (p / 28 + p % 28 + 5 * i) % (i + 3) == 0 { 230 } else { 10 })
                .collect();
            RawImage::from_bytes(&px).unwrap()
        })
        .collect()
}

fn small_config() -> ScheduleConfig {
    ScheduleConfig {
        initial_sweeps: 2,
        homeostasis1_iters: 5,
        onthefly_iters: 6,
        homeostasis2_iters: 4,
        n_classes: 5,
        n_train: 3,
        n_new: 2,
        hidden_units: 6,
        regularizer: RegularizerSpec {
            replicas: 3,
            ..RegularizerSpec::default()
        },
        seed: 11,
        ..ScheduleConfig::default()
    }
}

fn small_dataset() -> Dataset {
    Dataset::build_with_split(&synthetic_images(5), 3, 2).unwrap()
}

#[test]
fn one_row_per_iteration_with_global_numbering() {
    let config = small_config();
    let mut rows: Vec<MetricsRow> = Vec::new();
    run_experiment(&config, &small_dataset(), &mut rows).unwrap();
    assert_eq!(rows.len(), 15);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.iteration, i + 1);
        let expected = match i + 1 {
            1..=5 => Phase::Homeostasis1,
            6..=11 => Phase::OnTheFly,
            _ => Phase::Homeostasis2,
        };
        assert_eq!(row.phase, expected);
        let e = row.errors;
        assert_eq!(e.all_direct, (3.0 * e.train_direct + 2.0 * e.new_direct) / 5.0);
        assert_eq!(e.all_recall, (3.0 * e.train_recall + 2.0 * e.new_recall) / 5.0);
    }
}

#[test]
fn eval_every_thins_the_rows() {
    let config = ScheduleConfig {
        eval_every: 4,
        ..small_config()
    };
    let mut rows: Vec<MetricsRow> = Vec::new();
    run_experiment(&config, &small_dataset(), &mut rows).unwrap();
    let its: Vec<usize> = rows.iter().map(|r| r.iteration).collect();
    assert_eq!(its, [4, 8, 12]);
}

#[test]
fn same_seed_same_run() {
    let config = small_config();
    let ds = small_dataset();
    let (mut a, mut b): (Vec<MetricsRow>, Vec<MetricsRow>) = (Vec::new(), Vec::new());
    let pa = run_experiment(&config, &ds, &mut a).unwrap();
    let pb = run_experiment(&config, &ds, &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(pa, pb);

    let other = ScheduleConfig { seed: 12, ..config };
    let pc = run_experiment(&other, &ds, NullSink).unwrap();
    assert_ne!(pa, pc);
}

#[test]
fn empty_schedule_emits_no_rows() {
    let config = ScheduleConfig {
        homeostasis1_iters: 0,
        onthefly_iters: 0,
        homeostasis2_iters: 0,
        ..small_config()
    };
    let mut rows: Vec<MetricsRow> = Vec::new();
    let report = run_schedule(&config, &small_dataset(), &RunOptions::standard(&config), &mut rows).unwrap();
    assert!(rows.is_empty());
    assert_eq!(report.injections, [0, 0, 0]);
    assert!(report.class_draws.iter().all(|&c| c == 0));
}

#[test]
fn injections_only_during_on_the_fly() {
    let config = small_config();
    let report = run_schedule(&config, &small_dataset(), &RunOptions::standard(&config), NullSink).unwrap();
    assert_eq!(report.injections, [0, 6, 0]);
    assert_eq!(report.class_draws.iter().sum::<usize>(), 15);
    assert!(report.explosion.is_none());
}

#[test]
fn dataset_must_match_split() {
    let config = small_config();
    let ds = Dataset::build_with_split(&synthetic_images(5), 4, 1).unwrap();
    let err = run_experiment(&config, &ds, NullSink).unwrap_err();
    assert!(matches!(err, EngineError::InvalidConfig { .. }), "{err}");
}

#[test]
fn blow_up_is_reported_with_its_phase() {
    let config = ScheduleConfig {
        learning_rate: f64::MAX,
        ..small_config()
    };
    let err = run_experiment(&config, &small_dataset(), NullSink).unwrap_err();
    assert!(err.is_explosion(), "{err}");
    assert!(matches!(
        err,
        EngineError::NumericExplosion {
            phase: Some(Phase::InitialTraining),
            ..
        }
    ));

    let options = RunOptions {
        tolerate_explosion: true,
        ..RunOptions::standard(&config)
    };
    let report = run_schedule(&config, &small_dataset(), &options, NullSink).unwrap();
    assert!(report.explosion.unwrap().is_explosion());
}

/// Uniform class draws: 7500 draws over 75 classes put each count within 35
/// of its expectation of 100 (about 3.5 standard deviations).
#[test]
fn class_draws_are_uniform() {
    let config = ScheduleConfig {
        hidden_units: 4,
        regularizer: RegularizerSpec {
            replicas: 1,
            ..RegularizerSpec::default()
        },
        ..ScheduleConfig::default()
    };
    let root = RngStream::new(3);
    let mut plm = Plm::build(9, &config, 0.2, &root).unwrap();
    let mut streams = Streams::new(&root);
    let mut counts = [0usize; 75];
    for _ in 0..7500 {
        counts[psgd_iteration(&mut plm, &config, &config.regularizer, &mut streams).unwrap()] += 1;
    }
    for (class, &n) in counts.iter().enumerate() {
        assert!((65..=135).contains(&n), "class {class} drawn {n} times");
    }
}

/// Repeating one injected example teaches both networks that pair.
#[test]
fn repeated_injection_is_learned() {
    let config = ScheduleConfig {
        n_classes: 4,
        n_train: 3,
        n_new: 1,
        hidden_units: 8,
        ..ScheduleConfig::default()
    };
    let mean = 0.3;
    let pixels: Vec<f64> = (0..16).map(|p| if p % 5 == 0 { 0.9 } else { 0.1 }).collect();
    let example = Example {
        class: 3,
        split: Split::New,
        image: pixels.iter().map(|v| v - mean).collect(),
    };
    let root = RngStream::new(8);
    let mut plm = Plm::build(16, &config, mean, &root).unwrap();
    let mut streams = Streams::new(&root);
    for _ in 0..500 {
        injection_step(&mut plm, &example, &config, &config.regularizer, &mut streams).unwrap();
    }
    assert_eq!(plm.classify(&example.image).unwrap(), 3);
    let recalled = plm.synthesize(3).unwrap();
    let worst = recalled
        .iter()
        .zip(&example.image)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.1, "worst pixel error {worst}");
    assert_eq!(plm.classify(&recalled).unwrap(), 3);
    assert_eq!(argmax(&plm.storage().predict(&example.image).unwrap()), 3);
}
