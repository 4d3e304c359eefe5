//! Class-adaptive clean-sample selection with dual-view consistency training.
//!
//! Per mini-batch, each class threshold is the mean posterior of that class
//! over the samples labelled with it. Samples at or above their class threshold
//! are supervised with cross-entropy on both views; every sample contributes to
//! a symmetric-KL term that aligns the weak and strong views.

mod config;
mod objective;
mod selection;
mod train;

pub use config::{Mode, SelectionView, TrainConfig};
pub use objective::{alpha_schedule, consistency_loss, effective_alpha, supervision_loss, total_loss};
pub use selection::{compute_thresholds, select_clean, SelectionMask, ThresholdVector};
pub use train::{train, train_step, EpochRecord, FinalRecord, RunMetrics, StepRecord, TrainOutcome};
