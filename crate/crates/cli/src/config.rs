//! Experiment configuration: a flat `key = value` file, overridden by flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dnfer_core::data::Transform;
use dnfer_core::{AugmentationPolicy, BlobsSpec, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    Csv,
    Idx,
}

impl DatasetKind {
    fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::Csv => "csv",
            DatasetKind::Idx => "idx",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "csv" => Ok(DatasetKind::Csv),
            "idx" => Ok(DatasetKind::Idx),
            other => Err(format!("unknown dataset `{other}`, expected blobs, csv or idx")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataPaths {
    pub csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
    pub test_idx_images: Option<PathBuf>,
    pub test_idx_labels: Option<PathBuf>,
}

/// Augmentation settings that replace the modality defaults when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentationOverrides {
    pub weak_jitter_sigma: Option<f64>,
    pub weak_shift_max: Option<usize>,
    pub weak_flip_prob: Option<f64>,
    pub strong_transforms: Option<Vec<Transform>>,
    pub strong_picks: Option<usize>,
    pub strong_magnitude: Option<f64>,
}

impl AugmentationOverrides {
    pub fn apply(&self, mut policy: AugmentationPolicy) -> AugmentationPolicy {
        if let Some(v) = self.weak_jitter_sigma {
            policy.weak.jitter_sigma = v;
        }
        if let Some(v) = self.weak_shift_max {
            policy.weak.shift_max = v;
        }
        if let Some(v) = self.weak_flip_prob {
            policy.weak.flip_prob = v;
        }
        if let Some(v) = &self.strong_transforms {
            policy.strong.transform_pool = v.clone();
        }
        if let Some(v) = self.strong_picks {
            policy.strong.picks_per_sample = v;
        }
        if let Some(v) = self.strong_magnitude {
            policy.strong.magnitude = v;
        }
        policy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub dataset: DatasetKind,
    pub blobs: BlobsSpec,
    pub paths: DataPaths,
    pub noise_rate: f64,
    pub augmentation: AugmentationOverrides,
    pub repeats: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            dataset: DatasetKind::Blobs,
            blobs: BlobsSpec::default(),
            paths: DataPaths::default(),
            noise_rate: 0.0,
            augmentation: AugmentationOverrides::default(),
            repeats: 1,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("invalid value `{value}` for `{key}`: {e}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|v| parse(key, v)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Set one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        let path = || Some(PathBuf::from(value));
        match key {
            "mode" => t.mode = parse(key, value)?,
            "alpha" => t.alpha = parse(key, value)?,
            "warm_epochs" => t.warm_epochs = parse(key, value)?,
            "epochs" => t.max_epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "lr" => t.initial_lr = parse(key, value)?,
            "lr_decay" => t.lr_decay = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "oversample" => t.oversample = parse(key, value)?,
            "selection_view" => t.selection_view = parse(key, value)?,
            "hidden" => t.hidden = parse_list(key, value)?,
            "repeats" => self.repeats = parse(key, value)?,
            "noise_rate" => self.noise_rate = parse(key, value)?,
            "dataset" => self.dataset = parse(key, value)?,
            "blobs_classes" => self.blobs.num_classes = parse(key, value)?,
            "blobs_train_counts" => self.blobs.train_counts = parse_list(key, value)?,
            "blobs_test_counts" => self.blobs.test_counts = parse_list(key, value)?,
            "blobs_dim" => self.blobs.dim = parse(key, value)?,
            "blobs_separation" => self.blobs.separation = parse(key, value)?,
            "csv" => self.paths.csv = path(),
            "test_csv" => self.paths.test_csv = path(),
            "idx_images" => self.paths.idx_images = path(),
            "idx_labels" => self.paths.idx_labels = path(),
            "test_idx_images" => self.paths.test_idx_images = path(),
            "test_idx_labels" => self.paths.test_idx_labels = path(),
            "weak_jitter_sigma" => self.augmentation.weak_jitter_sigma = Some(parse(key, value)?),
            "weak_shift_max" => self.augmentation.weak_shift_max = Some(parse(key, value)?),
            "weak_flip_prob" => self.augmentation.weak_flip_prob = Some(parse(key, value)?),
            "strong_transforms" => self.augmentation.strong_transforms = Some(parse_list(key, value)?),
            "strong_picks" => self.augmentation.strong_picks = Some(parse(key, value)?),
            "strong_magnitude" => self.augmentation.strong_magnitude = Some(parse(key, value)?),
            "out" => self.out = path(),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Apply every `key = value` line of `text`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim()).map_err(|e| CliError::usage(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if self.repeats == 0 {
            return Err(CliError::usage("repeats must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(CliError::usage(format!("noise_rate must lie in [0, 1), got {}", self.noise_rate)));
        }
        let p = &self.paths;
        match self.dataset {
            DatasetKind::Blobs => {}
            DatasetKind::Csv if p.csv.is_none() || p.test_csv.is_none() => {
                return Err(CliError::usage("dataset csv needs both `csv` and `test_csv`"));
            }
            DatasetKind::Idx
                if [&p.idx_images, &p.idx_labels, &p.test_idx_images, &p.test_idx_labels]
                    .iter()
                    .any(|x| x.is_none()) =>
            {
                return Err(CliError::usage(
                    "dataset idx needs `idx_images`, `idx_labels`, `test_idx_images` and `test_idx_labels`",
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// The resolved configuration in the same format `apply_text` reads.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mode", t.mode.to_string());
        kv("alpha", t.alpha.to_string());
        kv("warm_epochs", t.warm_epochs.to_string());
        kv("epochs", t.max_epochs.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("lr", t.initial_lr.to_string());
        kv("lr_decay", t.lr_decay.to_string());
        kv("seed", t.seed.to_string());
        kv("oversample", t.oversample.to_string());
        kv("selection_view", t.selection_view.to_string());
        kv("hidden", join(&t.hidden));
        kv("repeats", self.repeats.to_string());
        kv("noise_rate", self.noise_rate.to_string());
        kv("dataset", self.dataset.as_str().into());
        match self.dataset {
            DatasetKind::Blobs => {
                kv("blobs_classes", self.blobs.num_classes.to_string());
                kv("blobs_train_counts", join(&self.blobs.train_counts));
                kv("blobs_test_counts", join(&self.blobs.test_counts));
                kv("blobs_dim", self.blobs.dim.to_string());
                kv("blobs_separation", self.blobs.separation.to_string());
            }
            DatasetKind::Csv | DatasetKind::Idx => {
                let p = &self.paths;
                for (k, v) in [
                    ("csv", &p.csv),
                    ("test_csv", &p.test_csv),
                    ("idx_images", &p.idx_images),
                    ("idx_labels", &p.idx_labels),
                    ("test_idx_images", &p.test_idx_images),
                    ("test_idx_labels", &p.test_idx_labels),
                ] {
                    if let Some(v) = v {
                        kv(k, v.display().to_string());
                    }
                }
            }
        }
        let a = &self.augmentation;
        if let Some(v) = a.weak_jitter_sigma {
            kv("weak_jitter_sigma", v.to_string());
        }
        if let Some(v) = a.weak_shift_max {
            kv("weak_shift_max", v.to_string());
        }
        if let Some(v) = a.weak_flip_prob {
            kv("weak_flip_prob", v.to_string());
        }
        if let Some(v) = &a.strong_transforms {
            kv("strong_transforms", join(v));
        }
        if let Some(v) = a.strong_picks {
            kv("strong_picks", v.to_string());
        }
        if let Some(v) = a.strong_magnitude {
            kv("strong_magnitude", v.to_string());
        }
        s
    }
}

impl FromStr for ExperimentConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text, "config")?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dnfer_core::Mode;

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "# comment\nmode = sup-only\nalpha=0.25\nhidden = 8, 4\nnoise_rate = 0.3\n\nstrong_transforms = large-jitter,random-scaling\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.train.mode, Mode::SupOnly);
        assert_eq!(cfg.train.hidden, vec![8, 4]);
        let back: ExperimentConfig = cfg.to_text().parse().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let err = ExperimentConfig::from_str("alpha = 0.5\nwat = 1\n").unwrap_err();
        assert!(err.to_string().contains("config:2"), "{err}");
        assert!(ExperimentConfig::from_str("mode = fancy").is_err());
        assert!(ExperimentConfig::from_str("no equals sign").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dataset = DatasetKind::Csv;
        assert!(cfg.validate().is_err());
        cfg.paths.csv = Some("a.csv".into());
        cfg.paths.test_csv = Some("b.csv".into());
        assert!(cfg.validate().is_ok());
        cfg.repeats = 0;
        assert!(cfg.validate().is_err());
    }
}
