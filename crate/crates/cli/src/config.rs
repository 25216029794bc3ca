//! The flat `key = value` run configuration.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use plm_core::{DitherDist, ScheduleConfig};

use crate::CliError;

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
    /// A check on the merged file, flags and defaults.
    Merged,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => f.write_str("--set"),
            Origin::Merged => f.write_str("merged config"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule: ScheduleConfig,
    pub images_path: PathBuf,
    pub labels_path: PathBuf,
    pub out_csv: PathBuf,
    pub out_svg: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig::default(),
            images_path: "data/train-images-idx3-ubyte".into(),
            labels_path: "data/train-labels-idx1-ubyte".into(),
            out_csv: "out/metrics.csv".into(),
            out_svg: None,
            dump_dir: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "initial_sweeps",
    "homeostasis1_iters",
    "onthefly_iters",
    "homeostasis2_iters",
    "n_classes",
    "n_train",
    "n_new",
    "hidden_units",
    "eval_every",
    "learning_rate",
    "recall_learning_rate",
    "recall_replay_learning_rate",
    "replicas",
    "dither_dist",
    "dither_scale",
    "dropout_rate",
    "seed",
    "images_path",
    "labels_path",
    "out_csv",
    "out_svg",
    "dump_dir",
];

impl RunConfig {
    /// Sets one key. The value is trimmed; an empty value clears the optional
    /// paths.
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), CliError> {
        let bad = |msg: String| CliError::Config {
            origin: origin.clone(),
            key: key.to_string(),
            msg,
        };
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("cannot parse {v:?}: {e}"))
        }
        let s = &mut self.schedule;
        let r = &mut s.regularizer;
        match key {
            "initial_sweeps" => s.initial_sweeps = num(value).map_err(bad)?,
            "homeostasis1_iters" => s.homeostasis1_iters = num(value).map_err(bad)?,
            "onthefly_iters" => s.onthefly_iters = num(value).map_err(bad)?,
            "homeostasis2_iters" => s.homeostasis2_iters = num(value).map_err(bad)?,
            "n_classes" => s.n_classes = num(value).map_err(bad)?,
            "n_train" => s.n_train = num(value).map_err(bad)?,
            "n_new" => s.n_new = num(value).map_err(bad)?,
            "hidden_units" => s.hidden_units = num(value).map_err(bad)?,
            "eval_every" => s.eval_every = num(value).map_err(bad)?,
            "learning_rate" => s.learning_rate = num(value).map_err(bad)?,
            "recall_learning_rate" => s.recall_learning_rate = num(value).map_err(bad)?,
            "recall_replay_learning_rate" => s.recall_replay_learning_rate = num(value).map_err(bad)?,
            "replicas" => r.replicas = num(value).map_err(bad)?,
            "dither_dist" => {
                r.dither_dist = match value.to_ascii_lowercase().as_str() {
                    "uniform" => DitherDist::Uniform,
                    "gaussian" => DitherDist::Gaussian,
                    _ => return Err(bad(format!("expected uniform or gaussian, got {value:?}"))),
                }
            }
            "dither_scale" => r.dither_scale = num(value).map_err(bad)?,
            "dropout_rate" => r.dropout_rate = num(value).map_err(bad)?,
            "seed" => s.seed = num(value).map_err(bad)?,
            "images_path" => self.images_path = required_path(value).map_err(bad)?,
            "labels_path" => self.labels_path = required_path(value).map_err(bad)?,
            "out_csv" => self.out_csv = required_path(value).map_err(bad)?,
            "out_svg" => self.out_svg = optional_path(value),
            "dump_dir" => self.dump_dir = optional_path(value),
            _ => return Err(bad("unknown key".into())),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults. Does not validate the
    /// resulting schedule; see [`RunConfig::validate`].
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let origin = Origin::Line(i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config {
                    origin,
                    key: line.to_string(),
                    msg: "expected key = value".into(),
                });
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config {
                    origin,
                    key: key.to_string(),
                    msg: "duplicate key".into(),
                });
            }
            config.set(key, value.trim(), origin)?;
        }
        Ok(config)
    }

    /// Reads and parses `path`, applies `overrides` in order, then validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::parse(&text)?;
        config.apply_overrides(overrides)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `key=value` flags; later flags win.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for o in overrides {
            let Some((key, value)) = o.split_once('=') else {
                return Err(CliError::Config {
                    origin: Origin::Flag,
                    key: o.clone(),
                    msg: "expected key=value".into(),
                });
            };
            self.set(key.trim(), value.trim(), Origin::Flag)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.schedule.validate().map_err(|e| {
            let (field, reason) = match e {
                plm_core::EngineError::InvalidConfig { field, reason } => (field, reason),
                other => ("config", other.to_string()),
            };
            CliError::Config {
                origin: Origin::Merged,
                key: field.to_string(),
                msg: reason,
            }
        })
    }
}

fn required_path(value: &str) -> Result<PathBuf, String> {
    if value.is_empty() {
        Err("path must not be empty".into())
    } else {
        Ok(PathBuf::from(value))
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_all_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# nothing\n\n   \n").unwrap(), RunConfig::default());
    }

    #[test]
    fn values_comments_and_whitespace() {
        let c = RunConfig::parse("seed = 42  # trailing\n  dither_dist=Gaussian\nout_svg = plot.svg\n").unwrap();
        assert_eq!(c.schedule.seed, 42);
        assert_eq!(c.schedule.regularizer.dither_dist, DitherDist::Gaussian);
        assert_eq!(c.out_svg, Some(PathBuf::from("plot.svg")));
    }

    #[test]
    fn every_key_is_accepted() {
        let mut c = RunConfig::default();
        for key in KEYS {
            let value = match *key {
                "dither_dist" => "uniform",
                k if k.ends_with("path") || k.starts_with("out") || k == "dump_dir" => "x",
                "learning_rate" | "recall_learning_rate" | "recall_replay_learning_rate" | "dither_scale"
                | "dropout_rate" => "0.25",
                _ => "3",
            };
            c.set(key, value, Origin::Flag).unwrap();
        }
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = RunConfig::parse("seed = 1\nlearning_rat = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("learning_rat") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = RunConfig::parse("seed = 42\nseed = 42\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn bad_value_names_key() {
        let err = RunConfig::parse("replicas = many\n").unwrap_err();
        assert!(err.to_string().contains("replicas"), "{err}");
        assert!(RunConfig::parse("no equals sign\n").is_err());
    }

    #[test]
    fn split_invariant_names_n_train() {
        let c = RunConfig::parse("n_train = 60\n").unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("n_train"), "{err}");
    }

    #[test]
    fn overrides_beat_file_and_last_wins() {
        let mut c = RunConfig::parse("seed = 5\n").unwrap();
        c.apply_overrides(&["seed=6".into(), "seed = 7".into()]).unwrap();
        assert_eq!(c.schedule.seed, 7);
        let err = c.apply_overrides(&["bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("--set"), "{err}");
    }
}
