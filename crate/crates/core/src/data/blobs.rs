use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::dataset::{Dataset, LabeledSample, Modality, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Class centres with every pair at distance at least `separation`.
///
/// With `dim >= C` the centres lie along orthonormal directions drawn from a
/// fixed internal seed, scaled so each pair is exactly `separation` apart and
/// the class signal is spread over every coordinate. Otherwise they lie on a
/// circle in the first two coordinates, or on a line when `dim == 1`. Centres
/// depend only on the arguments, so train and test draws share them.
pub fn blob_means(num_classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    if dim >= num_classes {
        let mut rng = ChaCha8Rng::seed_from_u64(0xB10B_C3E7);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
        while basis.len() < num_classes {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            for u in &basis {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-6 {
                basis.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        let r = separation / std::f64::consts::SQRT_2;
        return basis.into_iter().map(|u| u.into_iter().map(|a| a * r).collect()).collect();
    }
    (0..num_classes)
        .map(|c| {
            let mut mu = vec![0.0; dim];
            if dim >= 2 {
                let radius = separation / (2.0 * (std::f64::consts::PI / num_classes as f64).sin());
                let angle = 2.0 * std::f64::consts::PI * c as f64 / num_classes as f64;
                mu[0] = radius * angle.cos();
                mu[1] = radius * angle.sin();
            } else {
                mu[0] = separation * c as f64;
            }
            mu
        })
        .collect()
}

/// Unit-variance Gaussian clusters, laid out class by class with ids `0..N`.
pub fn generate_blobs<T: Scalar>(
    num_classes: usize,
    samples_per_class: &[usize],
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if dim < 1 {
        return Err(Error::config("blob dimension must be at least 1"));
    }
    if num_classes < 2 {
        return Err(Error::config("blobs need at least two classes"));
    }
    if samples_per_class.len() != num_classes || samples_per_class.contains(&0) {
        return Err(Error::config(format!("need {num_classes} positive per-class counts, got {samples_per_class:?}")));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::config("separation must be a finite non-negative number"));
    }
    let means = blob_means(num_classes, dim, separation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(samples_per_class.iter().sum());
    for (class, (&count, mu)) in samples_per_class.iter().zip(&means).enumerate() {
        for _ in 0..count {
            let features = mu
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::lit(m + z)
                })
                .collect();
            let sample_id = samples.len();
            samples.push(LabeledSample { features, observed_label: class, true_label: Some(class), sample_id });
        }
    }
    Dataset::new(samples, num_classes, Split::Train, Modality::Vector)
}

/// Train/test blob benchmark description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobsSpec {
    pub num_classes: usize,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub dim: usize,
    pub separation: f64,
}

impl Default for BlobsSpec {
    /// Imbalanced three-class training set with a balanced test set.
    fn default() -> Self {
        Self {
            num_classes: 3,
            train_counts: vec![600, 300, 100],
            test_counts: vec![100, 100, 100],
            dim: 128,
            separation: 8.0,
        }
    }
}

impl BlobsSpec {
    /// Train and test sets share class centres; the test draw uses a derived seed.
    pub fn generate<T: Scalar>(&self, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
        let train = generate_blobs(self.num_classes, &self.train_counts, self.dim, self.separation, seed)?;
        let test_seed = seed ^ 0x5EED_7E57_0000_0000;
        let test = generate_blobs(self.num_classes, &self.test_counts, self.dim, self.separation, test_seed)?
            .with_split(Split::Test);
        Ok((train, test))
    }
}
