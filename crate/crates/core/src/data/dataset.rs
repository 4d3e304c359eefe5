use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample<T> {
    pub features: Vec<T>,
    pub observed_label: usize,
    /// Ground truth, known only for synthetic or synthetically corrupted data.
    pub true_label: Option<usize>,
    pub sample_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    Vector,
    /// Row-major grayscale image with pixel values in `[0, 1]`.
    Image {
        height: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    samples: Vec<LabeledSample<T>>,
    num_classes: usize,
    split: Split,
    modality: Modality,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(samples: Vec<LabeledSample<T>>, num_classes: usize, split: Split, modality: Modality) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("dataset is empty"));
        }
        if num_classes == 0 {
            return Err(Error::config("num_classes must be positive"));
        }
        let dim = samples[0].features.len();
        if dim == 0 {
            return Err(Error::input("samples have no features"));
        }
        if let Modality::Image { height, width } = modality {
            if height * width != dim {
                return Err(Error::input(format!("image {height}x{width} does not match {dim} features")));
            }
        }
        let mut ids = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::input(format!("sample {i} has {} features, expected {dim}", s.features.len())));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("sample {i} has non-finite features")));
            }
            let bad = |y: usize| y >= num_classes;
            if bad(s.observed_label) || s.true_label.is_some_and(bad) {
                return Err(Error::input(format!("sample {i} has a label outside [0, {num_classes})")));
            }
            if !ids.insert(s.sample_id) {
                return Err(Error::input(format!("duplicate sample_id {}", s.sample_id)));
            }
        }
        Ok(Self { samples, num_classes, split, modality })
    }

    pub fn samples(&self) -> &[LabeledSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; construction rejects empty datasets.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].features.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn features(&self) -> Matrix<T> {
        let data = self.samples.iter().flat_map(|s| s.features.iter().copied()).collect();
        Matrix::from_vec(self.len(), self.dim(), data).expect("homogeneous features")
    }

    pub fn observed_labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.observed_label).collect()
    }

    /// Ground-truth labels, falling back to the observed label where unknown.
    pub fn reference_labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.true_label.unwrap_or(s.observed_label)).collect()
    }

    /// Per-sample `observed != true`, or `None` if any true label is unknown.
    pub fn flipped_flags(&self) -> Option<Vec<bool>> {
        self.samples.iter().map(|s| s.true_label.map(|t| t != s.observed_label)).collect()
    }

    /// Number of samples per observed class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.observed_label] += 1;
        }
        counts
    }

    /// Standard deviation of all feature values pooled together.
    pub fn feature_std(&self) -> f64 {
        let n = (self.len() * self.dim()) as f64;
        let vals = || self.samples.iter().flat_map(|s| s.features.iter().map(|v| v.to_f64_lossy()));
        let mean = vals().sum::<f64>() / n;
        (vals().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [LabeledSample<T>] {
        &mut self.samples
    }
}
