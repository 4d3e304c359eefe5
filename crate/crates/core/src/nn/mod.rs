//! Multi-layer perceptron with softmax output, hand-derived gradients for the
//! cross-entropy and symmetric-KL objectives, and an Adam optimizer.

mod adam;
mod backward;
pub mod checkpoint;
mod loss;
mod model;

pub use adam::{adam_step, decayed_lr, lr_schedule, AdamState, LR_DECAY};
pub use backward::{backward, backward_from_traces, GradientSet, LossBreakdown, Objective};
pub use loss::{cross_entropy, masked_cross_entropy, symmetric_kl, CrossEntropy, PosteriorMatrix};
pub use model::{ForwardTrace, MlpModel, ParamBuffers};
