use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{batch_iterator, AugmentationPolicy, BatchViews, Dataset};
use crate::dnfer::config::{Mode, SelectionView, TrainConfig};
use crate::dnfer::objective::effective_alpha;
use crate::dnfer::selection::{compute_thresholds, select_clean, SelectionMask, ThresholdVector};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate, evaluation_from_predictions, memorization_rate, predict, ConfusionMatrix, SelectionCounts,
};
use crate::nn::{adam_step, backward_from_traces, decayed_lr, AdamState, MlpModel, Objective};
use crate::scalar::Scalar;

/// What happened in one optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub batch_size: usize,
    pub warm_up: bool,
    pub alpha: f64,
    pub lr: f64,
    /// Computed every step, including warm-up where they do not gate anything.
    pub thresholds: ThresholdVector<f64>,
    pub selected_count: usize,
    pub sup_loss: f64,
    pub cons_loss: f64,
    pub total_loss: f64,
    /// Present when the batch carries ground-truth labels.
    pub selection: Option<SelectionCounts>,
}

impl StepRecord {
    pub fn selection_precision(&self) -> Option<f64> {
        self.selection.and_then(|s| s.quality().precision)
    }

    pub fn selection_recall(&self) -> Option<f64> {
        self.selection.and_then(|s| s.quality().recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub alpha: f64,
    /// Accuracy on the un-augmented training set against its observed labels.
    pub train_acc: f64,
    pub test_acc: f64,
    pub mean_sup_loss: f64,
    pub mean_cons_loss: f64,
    pub selected_fraction: f64,
    pub selection_precision: Option<f64>,
    pub selection_recall: Option<f64>,
    /// Mean of each class threshold over the batches containing that class.
    pub per_class_thresholds: Vec<Option<f64>>,
    /// Accuracy on the flipped subset against the wrong observed labels.
    pub memorization_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRecord {
    #[serde(rename = "final")]
    pub is_final: bool,
    pub test_acc: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Number of flipped training labels, `None` when ground truth is unknown.
    pub flipped_count: Option<usize>,
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepRecord>,
    pub final_record: FinalRecord,
}

impl RunMetrics {
    /// One JSON object per epoch, then the final record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("epoch record serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.final_record).expect("final record serializes"));
        out.push('\n');
        out
    }

    pub fn final_test_acc(&self) -> f64 {
        self.final_record.test_acc
    }

    pub fn final_memorization(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.memorization_rate)
    }
}

pub struct TrainOutcome<T> {
    pub metrics: RunMetrics,
    pub model: MlpModel<T>,
    pub optimizer: AdamState<T>,
}

/// Forward both views, select, take one Adam step.
pub fn train_step<T: Scalar>(
    model: &mut MlpModel<T>,
    batch: &BatchViews<T>,
    config: &TrainConfig,
    epoch: usize,
    opt_state: &mut AdamState<T>,
) -> Result<StepRecord> {
    if batch.is_empty() {
        return Err(Error::input("empty batch"));
    }
    let weak = model.forward_trace(&batch.weak)?;
    let strong = model.forward_trace(&batch.strong)?;
    let labels = &batch.labels;

    let mixed;
    let selection_posteriors = match config.selection_view {
        SelectionView::Weak => weak.posteriors(),
        SelectionView::Strong => strong.posteriors(),
        SelectionView::Mean => {
            mixed = weak.posteriors().mean_with(strong.posteriors())?;
            &mixed
        }
    };
    let thresholds = compute_thresholds(selection_posteriors, labels)?;
    let warm_up = epoch < config.warm_epochs;
    let mask = if warm_up || config.mode == Mode::Baseline {
        SelectionMask::all(batch.len())
    } else {
        select_clean(selection_posteriors, labels, &thresholds)?
    };

    let alpha = effective_alpha(epoch, config);
    let objective =
        Objective { alpha: T::lit(alpha), selected: mask.flags(), supervise_strong: config.mode != Mode::Baseline };
    let (grads, losses) = backward_from_traces(model, &weak, &strong, labels, &objective)?;
    let lr = decayed_lr(config.initial_lr, config.lr_decay, epoch);
    adam_step(model, &grads, opt_state, T::lit(lr))?;

    let selection = batch
        .true_labels
        .as_ref()
        .map(|truth| {
            let flipped: Vec<bool> = labels.iter().zip(truth).map(|(o, t)| o != t).collect();
            SelectionCounts::from_flags(mask.flags(), &flipped)
        })
        .transpose()?;

    Ok(StepRecord {
        epoch,
        batch_size: batch.len(),
        warm_up,
        alpha,
        lr,
        thresholds: thresholds.to_f64(),
        selected_count: mask.selected_count(),
        sup_loss: losses.supervision.to_f64_lossy(),
        cons_loss: losses.consistency.to_f64_lossy(),
        total_loss: losses.total.to_f64_lossy(),
        selection,
    })
}

/// Run `config.max_epochs` epochs of shuffled mini-batches, evaluating after each.
pub fn train<T: Scalar>(
    train_set: &Dataset<T>,
    test_set: &Dataset<T>,
    config: &TrainConfig,
    policy: &AugmentationPolicy,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.dim() != test_set.dim() {
        return Err(Error::config(format!(
            "train features have dimension {}, test features {}",
            train_set.dim(),
            test_set.dim()
        )));
    }
    let num_classes = train_set.num_classes().max(test_set.num_classes());
    let dims = config.layer_dims(train_set.dim(), num_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::init(&dims, &mut rng)?;
    let mut optimizer = AdamState::new(&dims);

    let flipped = train_set.flipped_flags();
    let observed = train_set.observed_labels();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut epochs = Vec::with_capacity(config.max_epochs);

    for epoch in 0..config.max_epochs {
        let first = steps.len();
        for batch in batch_iterator(train_set, config.batch_size, config.oversample, policy, config.seed, epoch)? {
            let step = steps.len();
            let record = train_step(&mut model, &batch, config, epoch, &mut optimizer)
                .map_err(|e| Error::Step { step, source: Box::new(e) })?;
            steps.push(record);
        }
        let epoch_steps = &steps[first..];

        let train_pred = predict(&model, train_set)?;
        let train_eval = evaluation_from_predictions(num_classes, &observed, &train_pred)?;
        let test_eval = evaluate(&model, test_set)?;
        epochs.push(summarize_epoch(
            epoch,
            config,
            epoch_steps,
            num_classes,
            train_eval.accuracy,
            test_eval.accuracy,
            flipped.as_deref().and_then(|f| memorization_rate(&train_pred, &observed, f)),
        ));
    }

    let test_eval = evaluate(&model, test_set)?;
    let metrics = RunMetrics {
        flipped_count: flipped.map(|f| f.iter().filter(|&&x| x).count()),
        epochs,
        steps,
        final_record: FinalRecord {
            is_final: true,
            test_acc: test_eval.accuracy,
            per_class_accuracy: test_eval.per_class_accuracy,
            confusion: test_eval.confusion,
        },
    };
    Ok(TrainOutcome { metrics, model, optimizer })
}

fn summarize_epoch(
    epoch: usize,
    config: &TrainConfig,
    steps: &[StepRecord],
    num_classes: usize,
    train_acc: f64,
    test_acc: f64,
    memorization: Option<f64>,
) -> EpochRecord {
    let n = steps.len().max(1) as f64;
    let total: usize = steps.iter().map(|s| s.batch_size).sum();
    let selected: usize = steps.iter().map(|s| s.selected_count).sum();
    let counts = steps.iter().try_fold(SelectionCounts::default(), |mut acc, s| {
        acc.add(&s.selection?);
        Some(acc)
    });
    let quality = counts.map(|c| c.quality());
    let mut sums = vec![0.0; num_classes];
    let mut seen = vec![0usize; num_classes];
    for s in steps {
        for (c, t) in s.thresholds.values().iter().enumerate() {
            if let Some(t) = t {
                sums[c] += t;
                seen[c] += 1;
            }
        }
    }
    EpochRecord {
        epoch,
        lr: decayed_lr(config.initial_lr, config.lr_decay, epoch),
        alpha: effective_alpha(epoch, config),
        train_acc,
        test_acc,
        mean_sup_loss: steps.iter().map(|s| s.sup_loss).sum::<f64>() / n,
        mean_cons_loss: steps.iter().map(|s| s.cons_loss).sum::<f64>() / n,
        selected_fraction: selected as f64 / total.max(1) as f64,
        selection_precision: quality.and_then(|q| q.precision),
        selection_recall: quality.and_then(|q| q.recall),
        per_class_thresholds: sums.iter().zip(&seen).map(|(&s, &k)| (k > 0).then(|| s / k as f64)).collect(),
        memorization_rate: memorization,
    }
}
