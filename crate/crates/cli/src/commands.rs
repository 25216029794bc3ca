use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use plm_core::engine::NullSink;
use plm_core::{
    evaluate, parse_idx_images, parse_idx_labels, run_experiment, run_schedule, Dataset, EngineError, ErrorRates,
    MetricsRow, Plm, RunOptions,
};

use crate::config::RunConfig;
use crate::csv::{parse_csv, CsvSink};
use crate::{pgm, state, svg, CliError};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(io_err(path))
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

/// Loads the images and labels named in `config` and selects the classes.
/// Labels are only checked for consistency: classes are image positions.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    let data_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Data { path, source }
    };
    let images = parse_idx_images(&read(&config.images_path)?).map_err(data_err(&config.images_path))?;
    let labels = parse_idx_labels(&read(&config.labels_path)?).map_err(data_err(&config.labels_path))?;
    if labels.len() != images.len() {
        return Err(CliError::Usage(format!(
            "{} has {} labels but {} has {} images",
            config.labels_path.display(),
            labels.len(),
            config.images_path.display(),
            images.len()
        )));
    }
    let s = &config.schedule;
    Dataset::build_with_split(&images, s.n_train, s.n_new).map_err(data_err(&config.images_path))
}

fn csv_sink(path: &Path) -> Result<CsvSink<BufWriter<File>>, CliError> {
    create_parent(path)?;
    let file = File::create(path).map_err(io_err(path))?;
    CsvSink::new(BufWriter::new(file)).map_err(io_err(path))
}

fn finish_csv(sink: CsvSink<BufWriter<File>>, path: &Path) -> Result<(), CliError> {
    sink.finish().map(drop).map_err(io_err(path))
}

fn last_row(path: &Path) -> Result<Option<MetricsRow>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_csv(&text)?.last().copied())
}

fn dump_images(plm: &Plm, dir: &Path) -> Result<usize, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for class in 0..plm.n_classes() {
        let image = plm.synthesize(class)?;
        write(&dir.join(pgm::file_name(class)), &pgm::encode(&image, plm.pixel_mean()))?;
    }
    Ok(plm.n_classes())
}

#[derive(Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    /// Error rates after initial training.
    pub initial: Option<ErrorRates>,
    pub initial_duration: Duration,
    pub last: Option<MetricsRow>,
}

/// Runs the full experiment, writing the CSV, and the SVG and dumps when the
/// config asks for them. A dump directory receives `model.bin` and one
/// graymap per class.
pub fn cmd_run(config_path: &Path, overrides: &[String]) -> Result<RunOutcome, CliError> {
    let config = RunConfig::load(config_path, overrides)?;
    let dataset = load_dataset(&config)?;
    let mut sink = csv_sink(&config.out_csv)?;
    let result = run_schedule(&config.schedule, &dataset, &RunOptions::standard(&config.schedule), &mut sink);
    finish_csv(sink, &config.out_csv)?;
    let report = result.map_err(|e| match e {
        EngineError::Sink(source) => CliError::Io {
            path: config.out_csv.clone(),
            source,
        },
        other => other.into(),
    })?;

    if let Some(svg_path) = &config.out_svg {
        cmd_plot(&config.out_csv, svg_path)?;
    }
    if let Some(dir) = &config.dump_dir {
        write(&dir.join("model.bin"), &state::encode(&report.plm))?;
        dump_images(&report.plm, dir)?;
    }
    let last = last_row(&config.out_csv)?;
    Ok(RunOutcome {
        config,
        initial: report.initial_errors,
        initial_duration: report.initial_duration,
        last,
    })
}

#[derive(Debug)]
pub struct AblateOutcome {
    pub config: RunConfig,
    pub last: Option<MetricsRow>,
    /// Set when non-finite values stopped the run.
    pub explosion: Option<EngineError>,
    /// Baseline's last row and this run's row at the same iteration.
    pub comparison: Option<(MetricsRow, MetricsRow)>,
}

/// The same schedule with PSGD stripped of dither, dropout and replicas. A
/// numeric blow-up ends the run but is reported, not treated as a failure.
pub fn cmd_ablate(config_path: &Path, overrides: &[String], baseline: Option<&Path>) -> Result<AblateOutcome, CliError> {
    let config = RunConfig::load(config_path, overrides)?;
    let dataset = load_dataset(&config)?;
    let mut sink = csv_sink(&config.out_csv)?;
    let result = run_schedule(&config.schedule, &dataset, &RunOptions::ablation(), &mut sink);
    finish_csv(sink, &config.out_csv)?;
    let report = result?;
    if let Some(svg_path) = &config.out_svg {
        cmd_plot(&config.out_csv, svg_path)?;
    }

    let text = fs::read_to_string(&config.out_csv).map_err(io_err(&config.out_csv))?;
    let rows = parse_csv(&text)?;
    let comparison = match baseline {
        Some(path) => {
            let base_text = fs::read_to_string(path).map_err(io_err(path))?;
            let base = parse_csv(&base_text)?;
            base.last().and_then(|b| {
                rows.iter()
                    .find(|r| r.iteration == b.iteration)
                    .map(|r| (*b, *r))
            })
        }
        None => None,
    };
    Ok(AblateOutcome {
        config,
        last: rows.last().copied(),
        explosion: report.explosion,
        comparison,
    })
}

/// Renders a metrics CSV as the two-panel SVG.
pub fn cmd_plot(csv_path: &Path, svg_path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(csv_path).map_err(io_err(csv_path))?;
    let rows = parse_csv(&text)?;
    write(svg_path, svg::render(&rows).as_bytes())
}

/// Writes one graymap per class, from a saved model or, without one, from a
/// machine retrained in-process. Returns the directory and the file count.
pub fn cmd_dump_recall(
    config_path: &Path,
    overrides: &[String],
    model: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<(PathBuf, usize), CliError> {
    let config = RunConfig::load(config_path, overrides)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.dump_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set dump_dir".into()))?;
    let plm = match model {
        Some(path) => state::decode(&read(path)?)?,
        None => run_experiment(&config.schedule, &load_dataset(&config)?, NullSink)?,
    };
    let n = dump_images(&plm, &dir)?;
    Ok((dir, n))
}

/// Error rates of a saved model on the configured dataset.
pub fn cmd_eval(config_path: &Path, overrides: &[String], model: &Path) -> Result<ErrorRates, CliError> {
    let config = RunConfig::load(config_path, overrides)?;
    let plm = state::decode(&read(model)?)?;
    let dataset = load_dataset(&config)?;
    if plm.n_classes() != dataset.len() || plm.pixels() != dataset.examples()[0].image.len() {
        return Err(CliError::State(format!(
            "model has {} classes and {} pixels, dataset has {} classes",
            plm.n_classes(),
            plm.pixels(),
            dataset.len()
        )));
    }
    Ok(evaluate(&plm, &dataset))
}
