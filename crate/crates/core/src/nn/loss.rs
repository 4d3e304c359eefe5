use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Softmax class probabilities for one view of a batch: rows are samples, columns classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMatrix<T> {
    probs: Matrix<T>,
}

impl<T: Scalar> PosteriorMatrix<T> {
    /// Row-wise softmax with the row maximum subtracted before exponentiation.
    pub fn softmax(logits: &Matrix<T>) -> Self {
        let mut probs = logits.clone();
        for i in 0..probs.rows() {
            let row = probs.row_mut(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Self { probs }
    }

    /// Wrap an existing probability matrix after checking it is row-stochastic.
    pub fn new(probs: Matrix<T>) -> Result<Self> {
        let tol = Self::row_sum_tolerance(probs.cols());
        for i in 0..probs.rows() {
            let row = probs.row(i);
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::input(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::input(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self { probs })
    }

    fn row_sum_tolerance(cols: usize) -> T {
        let scaled = T::epsilon() * T::lit(64.0 * cols.max(1) as f64);
        scaled.max(T::lit(1e-9))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    #[inline]
    pub fn get(&self, i: usize, c: usize) -> T {
        self.probs.get(i, c)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        self.probs.row(i)
    }

    pub fn batch_size(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.probs.cols()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.probs
    }

    /// Entry-wise mean of two posterior matrices (still row-stochastic).
    pub fn mean_with(&self, other: &Self) -> Result<Self> {
        Ok(Self { probs: self.probs.mean_with(&other.probs)? })
    }

    /// Rows permuted or subset by index.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self { probs: self.probs.select_rows(idx) }
    }

    /// Index of the largest entry of row `i`; ties go to the lowest class.
    pub fn argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (c, &p) in row.iter().enumerate().skip(1) {
            if p > row[best] {
                best = c;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy<T> {
    pub mean: T,
    pub per_sample: Vec<T>,
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::input(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
        return Err(Error::input(format!("label {y} at index {i} is outside [0, {classes})")));
    }
    Ok(())
}

/// `-ln p[i, y_i]` per sample with the probability floored, plus the batch mean.
pub fn cross_entropy<T: Scalar>(posteriors: &PosteriorMatrix<T>, labels: &[usize]) -> Result<CrossEntropy<T>> {
    check_labels(labels, posteriors.batch_size(), posteriors.num_classes())?;
    let floor = T::prob_floor();
    let per_sample: Vec<T> = labels.iter().enumerate().map(|(i, &y)| -posteriors.get(i, y).max(floor).ln()).collect();
    let mean = if per_sample.is_empty() {
        T::zero()
    } else {
        per_sample.iter().copied().sum::<T>() / T::lit(per_sample.len() as f64)
    };
    Ok(CrossEntropy { mean, per_sample })
}

/// Mean cross-entropy over the rows flagged in `mask`; zero when nothing is flagged.
pub fn masked_cross_entropy<T: Scalar>(posteriors: &PosteriorMatrix<T>, labels: &[usize], mask: &[bool]) -> Result<T> {
    if mask.len() != posteriors.batch_size() {
        return Err(Error::input(format!(
            "mask length {} does not match batch size {}",
            mask.len(),
            posteriors.batch_size()
        )));
    }
    let ce = cross_entropy(posteriors, labels)?;
    let (sum, n) =
        ce.per_sample.iter().zip(mask).filter(|(_, &m)| m).fold((T::zero(), 0usize), |(s, n), (&l, _)| (s + l, n + 1));
    Ok(if n == 0 { T::zero() } else { sum / T::lit(n as f64) })
}

/// `D(p||q) + D(q||p)` for one pair of rows, logs taken on floored arguments.
pub(crate) fn symmetric_kl_row<T: Scalar>(p: &[T], q: &[T]) -> T {
    let floor = T::prob_floor();
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let log_ratio = a.max(floor).ln() - b.max(floor).ln();
            a * log_ratio - b * log_ratio
        })
        .sum()
}

/// Batch mean of the symmetric Kullback-Leibler divergence between matching rows.
pub fn symmetric_kl<T: Scalar>(p: &PosteriorMatrix<T>, q: &PosteriorMatrix<T>) -> Result<T> {
    if p.as_matrix().shape() != q.as_matrix().shape() {
        return Err(Error::input(format!(
            "posterior shapes differ: {:?} vs {:?}",
            p.as_matrix().shape(),
            q.as_matrix().shape()
        )));
    }
    let b = p.batch_size();
    if b == 0 {
        return Ok(T::zero());
    }
    let total: T = (0..b).map(|i| symmetric_kl_row(p.row(i), q.row(i))).sum();
    Ok(total / T::lit(b as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn post(rows: &[&[f64]]) -> PosteriorMatrix<f64> {
        PosteriorMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn perfect_prediction_has_near_zero_loss() {
        let p = post(&[&[1.0 - 2e-12, 1e-12, 1e-12]]);
        let ce = cross_entropy(&p, &[0]).unwrap();
        assert!(ce.per_sample[0] < 1e-9);
    }

    #[test]
    fn half_probability_costs_ln2() {
        let p = post(&[&[0.5, 0.5]]);
        assert!((cross_entropy(&p, &[1]).unwrap().per_sample[0] - LN_2).abs() < 1e-9);
    }

    #[test]
    fn mean_of_ln2_and_ln4() {
        let p = post(&[&[0.5, 0.25, 0.25], &[0.5, 0.25, 0.25]]);
        let ce = cross_entropy(&p, &[0, 1]).unwrap();
        assert!((ce.mean - 1.5 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_is_floored() {
        let p = post(&[&[1.0, 0.0]]);
        let ce = cross_entropy(&p, &[1]).unwrap();
        assert!((ce.per_sample[0] - (-(1e-12f64).ln())).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        let p = post(&[&[0.5, 0.5]]);
        assert!(matches!(cross_entropy(&p, &[2]), Err(Error::Input(_))));
        assert!(matches!(cross_entropy(&p, &[0, 1]), Err(Error::Input(_))));
    }

    #[test]
    fn skl_identical_is_zero() {
        let p = post(&[&[0.2, 0.3, 0.5], &[0.9, 0.05, 0.05]]);
        assert!(symmetric_kl(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn skl_three_to_one_is_ln3() {
        let p = post(&[&[0.75, 0.25]]);
        let q = post(&[&[0.25, 0.75]]);
        assert!((symmetric_kl(&p, &q).unwrap() - 3f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn skl_nine_to_one_matches_two_term_sum() {
        // Computed term by term: D(p||q) = 0.9 ln 9 + 0.1 ln(1/9) = 0.8 ln 9, same for D(q||p).
        let expected = 1.6 * 9f64.ln();
        let p = post(&[&[0.9, 0.1]]);
        let q = post(&[&[0.1, 0.9]]);
        assert!((symmetric_kl(&p, &q).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 3.515_559_323_737_952).abs() < 1e-12);
    }

    #[test]
    fn skl_shape_mismatch() {
        let p = post(&[&[0.5, 0.5]]);
        let q = post(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(matches!(symmetric_kl(&p, &q), Err(Error::Input(_))));
    }

    #[test]
    fn masked_mean_over_selected_only() {
        let p = post(&[&[0.5, 0.5], &[0.25, 0.75]]);
        let v = masked_cross_entropy(&p, &[0, 0], &[false, true]).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-12);
        assert_eq!(masked_cross_entropy(&p, &[0, 0], &[false, false]).unwrap(), 0.0);
    }

    #[test]
    fn new_rejects_non_stochastic_rows() {
        assert!(PosteriorMatrix::from_rows(&[vec![0.5f64, 0.6]]).is_err());
        assert!(PosteriorMatrix::from_rows(&[vec![1.5f64, -0.5]]).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        let p = post(&[&[0.4, 0.4, 0.2], &[0.2, 0.4, 0.4]]);
        assert_eq!(p.argmax(0), 0);
        assert_eq!(p.argmax(1), 1);
    }
}
