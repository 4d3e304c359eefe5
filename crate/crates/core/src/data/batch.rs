use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::data::augment::{augment, AugmentationPolicy, View};
use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Weak and strong views of one mini-batch; row `i` of both comes from `sample_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchViews<T> {
    pub weak: Matrix<T>,
    pub strong: Matrix<T>,
    pub labels: Vec<usize>,
    pub true_labels: Option<Vec<usize>>,
    pub sample_ids: Vec<usize>,
}

impl<T> BatchViews<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Mix a run seed with an epoch index into an independent stream seed.
pub fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One epoch of augmented mini-batches.
pub struct BatchIter<'a, T> {
    dataset: &'a Dataset<T>,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
    policy: &'a AugmentationPolicy,
    rng: ChaCha8Rng,
}

impl<T> BatchIter<'_, T> {
    /// Dataset indices in the order this epoch visits them.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

/// Without oversampling the epoch is a seeded permutation of the dataset.
/// With oversampling it is `N` draws with replacement, weighted by the inverse
/// frequency of each sample's observed class.
pub fn batch_iterator<'a, T: Scalar>(
    dataset: &'a Dataset<T>,
    batch_size: usize,
    oversample: bool,
    policy: &'a AugmentationPolicy,
    seed: u64,
    epoch: usize,
) -> Result<BatchIter<'a, T>> {
    if batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    policy.validate(dataset.modality())?;
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(seed, epoch));
    let n = dataset.len();
    let order = if oversample {
        let counts = dataset.class_counts();
        let weights: Vec<f64> = dataset.samples().iter().map(|s| 1.0 / counts[s.observed_label] as f64).collect();
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::config(format!("oversampling weights: {e}")))?;
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
    };
    let aug_rng = ChaCha8Rng::seed_from_u64(rng.random());
    Ok(BatchIter { dataset, order, batch_size, pos: 0, policy, rng: aug_rng })
}

impl<T: Scalar> Iterator for BatchIter<'_, T> {
    type Item = BatchViews<T>;

    fn next(&mut self) -> Option<BatchViews<T>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;

        let d = self.dataset.dim();
        let modality = self.dataset.modality();
        let mut weak = Vec::with_capacity(idx.len() * d);
        let mut strong = Vec::with_capacity(idx.len() * d);
        let mut labels = Vec::with_capacity(idx.len());
        let mut true_labels = Vec::with_capacity(idx.len());
        let mut sample_ids = Vec::with_capacity(idx.len());
        for &i in idx {
            let s = &self.dataset.samples()[i];
            // The policy was validated when the iterator was built.
            let w = augment(&s.features, modality, self.policy, View::Weak, &mut self.rng).expect("validated policy");
            let st =
                augment(&s.features, modality, self.policy, View::Strong, &mut self.rng).expect("validated policy");
            weak.extend(w);
            strong.extend(st);
            labels.push(s.observed_label);
            true_labels.push(s.true_label);
            sample_ids.push(s.sample_id);
        }
        let rows = idx.len();
        Some(BatchViews {
            weak: Matrix::from_vec(rows, d, weak).expect("row-aligned"),
            strong: Matrix::from_vec(rows, d, strong).expect("row-aligned"),
            labels,
            true_labels: true_labels.into_iter().collect(),
            sample_ids,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_blobs;

    #[test]
    fn partitions_without_oversampling() {
        let ds = generate_blobs::<f64>(2, &[5, 5], 2, 4.0, 1).unwrap();
        let p = AugmentationPolicy::identity();
        let batches: Vec<_> = batch_iterator(&ds, 4, false, &p, 3, 0).unwrap().collect();
        assert_eq!(batches.iter().map(BatchViews::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut ids: Vec<usize> = batches.iter().flat_map(|b| b.sample_ids.clone()).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn rows_match_source_samples() {
        let ds = generate_blobs::<f64>(3, &[4, 4, 4], 3, 4.0, 2).unwrap();
        let p = AugmentationPolicy::identity();
        for b in batch_iterator(&ds, 5, false, &p, 9, 1).unwrap() {
            for (r, &id) in b.sample_ids.iter().enumerate() {
                let s = &ds.samples()[id];
                assert_eq!(b.weak.row(r), &s.features[..]);
                assert_eq!(b.strong.row(r), &s.features[..]);
                assert_eq!(b.labels[r], s.observed_label);
            }
        }
    }

    #[test]
    fn oversampling_evens_out_classes() {
        let ds = generate_blobs::<f64>(3, &[300, 60, 30], 1, 4.0, 5).unwrap();
        let p = AugmentationPolicy::identity();
        let mut counts = [0usize; 3];
        let mut draws = 0;
        let mut epoch = 0;
        while draws < 10_000 {
            for s in batch_iterator(&ds, 128, true, &p, 11, epoch).unwrap().order() {
                counts[ds.samples()[*s].observed_label] += 1;
                draws += 1;
            }
            epoch += 1;
        }
        for &k in &counts {
            let freq = k as f64 / draws as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.05 / 3.0, "{counts:?}");
        }
    }

    #[test]
    fn same_seed_and_epoch_reproduce() {
        let ds = generate_blobs::<f64>(2, &[20, 20], 4, 4.0, 3).unwrap();
        let p = AugmentationPolicy::vector_default(ds.feature_std());
        let a: Vec<_> = batch_iterator(&ds, 7, false, &p, 1, 2).unwrap().collect();
        let b: Vec<_> = batch_iterator(&ds, 7, false, &p, 1, 2).unwrap().collect();
        assert_eq!(a, b);
        let c: Vec<_> = batch_iterator(&ds, 7, false, &p, 1, 3).unwrap().collect();
        assert_ne!(a[0].sample_ids, c[0].sample_ids);
    }

    #[test]
    fn zero_batch_size_rejected() {
        let ds = generate_blobs::<f64>(2, &[2, 2], 1, 4.0, 3).unwrap();
        let p = AugmentationPolicy::identity();
        assert!(batch_iterator(&ds, 0, false, &p, 1, 0).is_err());
    }
}
