use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which view's posteriors drive threshold computation and selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionView {
    #[default]
    Weak,
    Strong,
    /// Entry-wise mean of the two views.
    Mean,
}

/// Training objective variants used for component ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Selection-masked supervision plus consistency.
    #[default]
    Dnfer,
    /// Cross-entropy on the weak view of every sample, every epoch.
    Baseline,
    /// Selection-masked supervision only.
    SupOnly,
    /// Consistency only once warm-up ends.
    ConsOnly,
}

macro_rules! str_enum {
    ($ty:ty, $what:literal, { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::config(format!(concat!("unknown ", $what, " {:?}"), other))),
                }
            }
        }
    };
}

str_enum!(SelectionView, "selection view", {
    SelectionView::Weak => "weak",
    SelectionView::Strong => "strong",
    SelectionView::Mean => "mean",
});

str_enum!(Mode, "mode", {
    Mode::Dnfer => "dnfer",
    Mode::Baseline => "baseline",
    Mode::SupOnly => "sup-only",
    Mode::ConsOnly => "cons-only",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub warm_epochs: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub oversample: bool,
    pub selection_view: SelectionView,
    pub mode: Mode,
    /// Hidden layer widths of the classifier.
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            warm_epochs: 5,
            max_epochs: 40,
            batch_size: 128,
            initial_lr: 0.001,
            lr_decay: 0.95,
            seed: 0,
            oversample: false,
            selection_view: SelectionView::Weak,
            mode: Mode::Dnfer,
            hidden: vec![64, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be positive"));
        }
        if self.warm_epochs >= self.max_epochs {
            return Err(Error::config(format!(
                "warm_epochs ({}) must be smaller than max_epochs ({})",
                self.warm_epochs, self.max_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::config("initial_lr must be a positive finite number"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::config("lr_decay must lie in (0, 1]"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// Full layer dimensions for a given input width and class count.
    pub fn layer_dims(&self, input_dim: usize, num_classes: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(input_dim);
        dims.extend(&self.hidden);
        dims.push(num_classes);
        dims
    }
}
