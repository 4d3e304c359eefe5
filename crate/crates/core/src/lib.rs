//! Noisy-label training with per-mini-batch class-adaptive clean-sample
//! selection and weak/strong consistency regularization.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiment driver uses.
//!
//! ```
//! use dnfer_core::{AugmentationPolicy, BlobsSpec, TrainConfig};
//!
//! let spec = BlobsSpec { train_counts: vec![40, 20, 10], test_counts: vec![10, 10, 10], ..BlobsSpec::default() };
//! let (train, test) = spec.generate::<f64>(1).unwrap();
//! let config = TrainConfig { max_epochs: 2, warm_epochs: 1, batch_size: 16, ..TrainConfig::default() };
//! let policy = AugmentationPolicy::vector_default(train.feature_std());
//! let out = dnfer_core::train(&train, &test, &config, &policy).unwrap();
//! assert_eq!(out.metrics.epochs.len(), 2);
//! ```

pub mod data;
pub mod dnfer;
mod error;
pub mod matrix;
pub mod metrics;
pub mod nn;
mod scalar;

pub use data::{AugmentationPolicy, BlobsSpec, Modality, NoiseSpec, Split};
pub use dnfer::{train, Mode, RunMetrics, SelectionView, TrainConfig};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = matrix::Matrix<f64>;
pub type MlpModel = nn::MlpModel<f64>;
pub type PosteriorMatrix = nn::PosteriorMatrix<f64>;
pub type GradientSet = nn::GradientSet<f64>;
pub type AdamState = nn::AdamState<f64>;
pub type Dataset = data::Dataset<f64>;
pub type LabeledSample = data::LabeledSample<f64>;
pub type BatchViews = data::BatchViews<f64>;
pub type ThresholdVector = dnfer::ThresholdVector<f64>;
pub type TrainOutcome = dnfer::TrainOutcome<f64>;

pub type MlpModelF32 = nn::MlpModel<f32>;
pub type DatasetF32 = data::Dataset<f32>;
