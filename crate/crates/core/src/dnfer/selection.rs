use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::PosteriorMatrix;
use crate::scalar::Scalar;

/// Per-class mean posterior; `None` for classes absent from the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector<T> {
    values: Vec<Option<T>>,
}

impl<T: Scalar> ThresholdVector<T> {
    pub fn get(&self, class: usize) -> Option<T> {
        self.values.get(class).copied().flatten()
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    pub fn to_f64(&self) -> ThresholdVector<f64> {
        ThresholdVector { values: self.values.iter().map(|v| v.map(Scalar::to_f64_lossy)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    flags: Vec<bool>,
    selected_count: usize,
}

impl SelectionMask {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let selected_count = flags.iter().filter(|&&f| f).count();
        Self { flags, selected_count }
    }

    pub fn all(batch_size: usize) -> Self {
        Self::from_flags(vec![true; batch_size])
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn selected_count(&self) -> usize {
        self.selected_count
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

fn check_labels(labels: &[usize], posteriors_rows: usize, classes: usize) -> Result<()> {
    if labels.len() != posteriors_rows {
        return Err(Error::input(format!("{} labels for {posteriors_rows} posterior rows", labels.len())));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::input(format!("label {y} outside [0, {classes})")));
    }
    Ok(())
}

/// `T_c` = mean of `p[i, c]` over the rows labelled `c`.
pub fn compute_thresholds<T: Scalar>(posteriors: &PosteriorMatrix<T>, labels: &[usize]) -> Result<ThresholdVector<T>> {
    let c = posteriors.num_classes();
    check_labels(labels, posteriors.batch_size(), c)?;
    let mut sums = vec![T::zero(); c];
    let mut counts = vec![0usize; c];
    for (i, &y) in labels.iter().enumerate() {
        sums[y] += posteriors.get(i, y);
        counts[y] += 1;
    }
    let values = sums.into_iter().zip(counts).map(|(s, n)| (n > 0).then(|| s / T::lit(n as f64))).collect();
    Ok(ThresholdVector { values })
}

/// Keep row `i` when `p[i, y_i] >= T_{y_i}`.
pub fn select_clean<T: Scalar>(
    posteriors: &PosteriorMatrix<T>,
    labels: &[usize],
    thresholds: &ThresholdVector<T>,
) -> Result<SelectionMask> {
    check_labels(labels, posteriors.batch_size(), posteriors.num_classes())?;
    let flags = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let t = thresholds
                .get(y)
                .ok_or_else(|| Error::Invariant(format!("no threshold for class {y} present in the batch")))?;
            Ok(posteriors.get(i, y) >= t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionMask::from_flags(flags))
}
