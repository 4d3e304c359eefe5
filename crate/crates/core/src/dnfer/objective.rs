use crate::dnfer::config::{Mode, TrainConfig};
use crate::dnfer::selection::SelectionMask;
use crate::error::{Error, Result};
use crate::nn::{masked_cross_entropy, symmetric_kl, PosteriorMatrix};
use crate::scalar::Scalar;

/// Cross-entropy on both views, each averaged over the selected rows.
pub fn supervision_loss<T: Scalar>(
    p_w: &PosteriorMatrix<T>,
    p_s: &PosteriorMatrix<T>,
    labels: &[usize],
    mask: &SelectionMask,
) -> Result<T> {
    if labels.is_empty() {
        return Err(Error::input("supervision loss of an empty batch"));
    }
    if p_w.as_matrix().shape() != p_s.as_matrix().shape() {
        return Err(Error::input("weak and strong posteriors differ in shape"));
    }
    Ok(masked_cross_entropy(p_w, labels, mask.flags())? + masked_cross_entropy(p_s, labels, mask.flags())?)
}

/// Symmetric KL between the strong and weak views over every row.
pub fn consistency_loss<T: Scalar>(p_w: &PosteriorMatrix<T>, p_s: &PosteriorMatrix<T>) -> Result<T> {
    symmetric_kl(p_s, p_w)
}

/// `alpha * l_cons + (1 - alpha) * l_sup`.
pub fn total_loss<T: Scalar>(alpha: T, l_sup: T, l_cons: T) -> Result<T> {
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(alpha * l_cons + (T::one() - alpha) * l_sup)
}

/// Zero during warm-up, `config.alpha` afterwards.
pub fn alpha_schedule(epoch: usize, config: &TrainConfig) -> f64 {
    if epoch < config.warm_epochs {
        0.0
    } else {
        config.alpha
    }
}

/// Consistency weight actually optimized in `epoch` under `config.mode`.
pub fn effective_alpha(epoch: usize, config: &TrainConfig) -> f64 {
    let warm = epoch < config.warm_epochs;
    match config.mode {
        Mode::Dnfer => alpha_schedule(epoch, config),
        Mode::Baseline | Mode::SupOnly => 0.0,
        Mode::ConsOnly if warm => 0.0,
        Mode::ConsOnly => 1.0,
    }
}
