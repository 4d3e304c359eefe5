//! Datasets, file ingestion, synthetic data, label noise, augmentation and batching.

mod augment;
mod batch;
mod blobs;
mod dataset;
pub mod io;
mod noise;

pub use augment::{augment, AugmentationPolicy, StrongPolicy, Transform, View, WeakPolicy};
pub use batch::{batch_iterator, epoch_seed, BatchIter, BatchViews};
pub use blobs::{blob_means, generate_blobs, BlobsSpec};
pub use dataset::{Dataset, LabeledSample, Modality, Split};
pub use noise::{inject_noise, NoiseKind, NoiseSpec, NoisyDataset};
