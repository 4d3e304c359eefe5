use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// A flipped label is drawn uniformly from the other `C - 1` classes.
    SymmetricUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub rate: f64,
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn symmetric(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::config(format!("noise rate must lie in [0, 1], got {rate}")));
        }
        Ok(Self { rate, kind: NoiseKind::SymmetricUniform, seed })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset<T> {
    pub dataset: Dataset<T>,
    /// `flipped[i]` is true exactly when sample `i` no longer carries its true label.
    pub flipped: Vec<bool>,
}

/// Flip exactly `round(rate * N)` labels, chosen uniformly without replacement.
pub fn inject_noise<T: Scalar>(dataset: &Dataset<T>, spec: &NoiseSpec) -> Result<NoisyDataset<T>> {
    if !(0.0..=1.0).contains(&spec.rate) {
        return Err(Error::config(format!("noise rate must lie in [0, 1], got {}", spec.rate)));
    }
    if dataset.split() != Split::Train {
        return Err(Error::input("label noise is only injected into training splits"));
    }
    let n = dataset.len();
    let c = dataset.num_classes();
    let flips = (spec.rate * n as f64).round() as usize;
    if flips > 0 && c < 2 {
        return Err(Error::config("label flips need at least two classes"));
    }

    let mut out = dataset.clone();
    for s in out.samples_mut() {
        let truth = s.true_label.unwrap_or(s.observed_label);
        s.true_label = Some(truth);
        s.observed_label = truth;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen = index::sample(&mut rng, n, flips).into_vec();
    chosen.sort_unstable();
    let mut flipped = vec![false; n];
    let samples = out.samples_mut();
    for i in chosen {
        let truth = samples[i].observed_label;
        let r = rng.random_range(0..c - 1);
        samples[i].observed_label = if r >= truth { r + 1 } else { r };
        flipped[i] = true;
    }
    Ok(NoisyDataset { dataset: out, flipped })
}
