//! Weak and strong input perturbations.
//!
//! Vector data gets Gaussian jitter as its weak view and a random composition
//! of feature-space transforms as its strong view. Images get flip plus
//! pad-and-crop as the weak view and RandAugment-style picks as the strong view.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::dataset::Modality;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    LargeJitter,
    CoordinateDropout,
    RandomScaling,
    RandomRotation,
    Invert,
    Rotate,
    Translate,
    Contrast,
}

impl Transform {
    pub const VECTOR_POOL: [Transform; 4] =
        [Transform::LargeJitter, Transform::CoordinateDropout, Transform::RandomScaling, Transform::RandomRotation];
    pub const IMAGE_POOL: [Transform; 4] =
        [Transform::Invert, Transform::Rotate, Transform::Translate, Transform::Contrast];

    pub fn name(self) -> &'static str {
        match self {
            Transform::LargeJitter => "large-jitter",
            Transform::CoordinateDropout => "coordinate-dropout",
            Transform::RandomScaling => "random-scaling",
            Transform::RandomRotation => "random-rotation",
            Transform::Invert => "invert",
            Transform::Rotate => "rotate",
            Transform::Translate => "translate",
            Transform::Contrast => "contrast",
        }
    }

    fn is_image(self) -> bool {
        Self::IMAGE_POOL.contains(&self)
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::VECTOR_POOL
            .iter()
            .chain(&Self::IMAGE_POOL)
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::config(format!("unknown transform {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakPolicy {
    pub jitter_sigma: f64,
    pub shift_max: usize,
    pub flip_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongPolicy {
    pub transform_pool: Vec<Transform>,
    pub picks_per_sample: usize,
    pub magnitude: f64,
    /// Feature scale that vector-space magnitudes are relative to.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub weak: WeakPolicy,
    pub strong: StrongPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum View {
    Weak,
    Strong,
}

impl AugmentationPolicy {
    /// Weak jitter of 5% of the feature spread; two strong picks at magnitude 0.3.
    pub fn vector_default(feature_std: f64) -> Self {
        Self {
            weak: WeakPolicy { jitter_sigma: 0.05 * feature_std, shift_max: 0, flip_prob: 0.0 },
            strong: StrongPolicy {
                transform_pool: Transform::VECTOR_POOL.to_vec(),
                picks_per_sample: 2,
                magnitude: 0.3,
                scale: feature_std,
            },
        }
    }

    /// Flip with probability 0.5 and shift up to 4 px at 28 px width, scaled with width.
    pub fn image_default(width: usize) -> Self {
        let shift_max = ((4.0 * width as f64 / 28.0).round() as usize).max(1);
        Self {
            weak: WeakPolicy { jitter_sigma: 0.0, shift_max, flip_prob: 0.5 },
            strong: StrongPolicy {
                transform_pool: Transform::IMAGE_POOL.to_vec(),
                picks_per_sample: 2,
                magnitude: 0.3,
                scale: 1.0,
            },
        }
    }

    pub fn for_modality(modality: Modality, feature_std: f64) -> Self {
        match modality {
            Modality::Vector => Self::vector_default(feature_std),
            Modality::Image { width, .. } => Self::image_default(width),
        }
    }

    /// Leaves every sample untouched in both views.
    pub fn identity() -> Self {
        Self {
            weak: WeakPolicy { jitter_sigma: 0.0, shift_max: 0, flip_prob: 0.0 },
            strong: StrongPolicy { transform_pool: vec![], picks_per_sample: 0, magnitude: 1.0, scale: 1.0 },
        }
    }

    pub fn validate(&self, modality: Modality) -> Result<()> {
        let w = &self.weak;
        if !(w.jitter_sigma >= 0.0 && w.jitter_sigma.is_finite()) {
            return Err(Error::config("jitter_sigma must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&w.flip_prob) {
            return Err(Error::config("flip_prob must lie in [0, 1]"));
        }
        let s = &self.strong;
        if s.picks_per_sample > s.transform_pool.len() {
            return Err(Error::config(format!(
                "picks_per_sample {} exceeds pool size {}",
                s.picks_per_sample,
                s.transform_pool.len()
            )));
        }
        if !(s.magnitude > 0.0 && s.magnitude <= 1.0) {
            return Err(Error::config("strong magnitude must lie in (0, 1]"));
        }
        if !(s.scale >= 0.0 && s.scale.is_finite()) {
            return Err(Error::config("strong scale must be finite and non-negative"));
        }
        let image = matches!(modality, Modality::Image { .. });
        if let Some(t) = s.transform_pool.iter().find(|t| t.is_image() != image) {
            return Err(Error::config(format!("transform {t} does not apply to {modality:?} data")));
        }
        Ok(())
    }
}

/// Produce one augmented copy of `features` for the requested view.
pub fn augment<T: Scalar, R: Rng + ?Sized>(
    features: &[T],
    modality: Modality,
    policy: &AugmentationPolicy,
    view: View,
    rng: &mut R,
) -> Result<Vec<T>> {
    policy.validate(modality)?;
    let mut x: Vec<f64> = features.iter().map(|v| v.to_f64_lossy()).collect();
    match view {
        View::Weak => weak(&mut x, modality, &policy.weak, rng),
        View::Strong => {
            let s = &policy.strong;
            let picks = index::sample(rng, s.transform_pool.len(), s.picks_per_sample).into_vec();
            for i in picks {
                apply(&mut x, modality, s.transform_pool[i], s, rng);
            }
        }
    }
    Ok(x.into_iter().map(T::lit).collect())
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn weak<R: Rng + ?Sized>(x: &mut [f64], modality: Modality, p: &WeakPolicy, rng: &mut R) {
    if let Modality::Image { height, width } = modality {
        if p.flip_prob > 0.0 && rng.random_bool(p.flip_prob) {
            for row in x.chunks_mut(width) {
                row.reverse();
            }
        }
        if p.shift_max > 0 {
            let s = p.shift_max as i64;
            let dx = rng.random_range(-s..=s);
            let dy = rng.random_range(-s..=s);
            shift_image(x, height, width, dx, dy);
        }
    }
    if p.jitter_sigma > 0.0 {
        for v in x.iter_mut() {
            *v += p.jitter_sigma * gaussian(rng);
        }
    }
}

fn apply<R: Rng + ?Sized>(x: &mut [f64], modality: Modality, t: Transform, p: &StrongPolicy, rng: &mut R) {
    let m = p.magnitude;
    match (t, modality) {
        (Transform::LargeJitter, _) => {
            for v in x.iter_mut() {
                *v += m * p.scale * gaussian(rng);
            }
        }
        (Transform::CoordinateDropout, _) => {
            // Inverted dropout keeps the expected vector unchanged.
            let keep = if m < 1.0 { 1.0 / (1.0 - m) } else { 0.0 };
            for v in x.iter_mut() {
                *v = if rng.random_bool(m) { 0.0 } else { *v * keep };
            }
        }
        (Transform::RandomScaling, _) => {
            let f = rng.random_range(1.0 - m..=1.0 + m);
            x.iter_mut().for_each(|v| *v *= f);
        }
        (Transform::RandomRotation, _) => {
            if x.len() >= 2 {
                let pair = index::sample(rng, x.len(), 2).into_vec();
                let (i, j) = (pair[0], pair[1]);
                let limit = m * std::f64::consts::FRAC_PI_4;
                let theta = rng.random_range(-limit..=limit);
                let (s, c) = theta.sin_cos();
                let (a, b) = (x[i], x[j]);
                x[i] = c * a - s * b;
                x[j] = s * a + c * b;
            }
        }
        (Transform::Invert, _) => x.iter_mut().for_each(|v| *v = 1.0 - *v),
        (Transform::Rotate, Modality::Image { height, width }) => {
            let limit = m * 30f64.to_radians();
            let theta = rng.random_range(-limit..=limit);
            rotate_image(x, height, width, theta);
        }
        (Transform::Translate, Modality::Image { height, width }) => {
            let s = ((m * width as f64 / 4.0).round() as i64).max(1);
            let dx = rng.random_range(-s..=s);
            let dy = rng.random_range(-s..=s);
            shift_image(x, height, width, dx, dy);
        }
        (Transform::Contrast, _) => {
            let f = rng.random_range(1.0 - m..=1.0 + m);
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            x.iter_mut().for_each(|v| *v = (mean + (*v - mean) * f).clamp(0.0, 1.0));
        }
        // Validation keeps image transforms away from vector data.
        (Transform::Rotate | Transform::Translate, Modality::Vector) => {}
    }
}

/// Move content by (dx, dy) pixels, filling uncovered pixels with zero.
fn shift_image(x: &mut [f64], h: usize, w: usize, dx: i64, dy: i64) {
    let src = x.to_vec();
    for r in 0..h {
        for c in 0..w {
            let (sr, sc) = (r as i64 - dy, c as i64 - dx);
            x[r * w + c] = if (0..h as i64).contains(&sr) && (0..w as i64).contains(&sc) {
                src[sr as usize * w + sc as usize]
            } else {
                0.0
            };
        }
    }
}

/// Nearest-neighbour rotation about the image centre.
fn rotate_image(x: &mut [f64], h: usize, w: usize, theta: f64) {
    let src = x.to_vec();
    let (s, c) = theta.sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    for r in 0..h {
        for col in 0..w {
            let (y, xx) = (r as f64 - cy, col as f64 - cx);
            let sy = (c * y - s * xx + cy).round();
            let sx = (s * y + c * xx + cx).round();
            x[r * w + col] = if sy >= 0.0 && sx >= 0.0 && (sy as usize) < h && (sx as usize) < w {
                src[sy as usize * w + sx as usize]
            } else {
                0.0
            };
        }
    }
}
