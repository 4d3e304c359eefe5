//! Accuracy, confusion matrices, selection quality and memorization traces.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dnfer::RunMetrics;
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::scalar::Scalar;

/// Rows are reference classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self { counts: vec![vec![0; num_classes]; num_classes] }
    }

    pub fn from_pairs(num_classes: usize, reference: &[usize], predicted: &[usize]) -> Result<Self> {
        if reference.len() != predicted.len() {
            return Err(Error::input("reference and prediction lengths differ"));
        }
        let mut m = Self::new(num_classes);
        for (&r, &p) in reference.iter().zip(predicted) {
            if r >= num_classes || p >= num_classes {
                return Err(Error::input(format!("class index outside [0, {num_classes})")));
            }
            m.counts[r][p] += 1;
        }
        Ok(m)
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total().max(1) as f64
    }

    /// Diagonal over row sums; `None` for classes with no reference samples.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let c = self.num_classes();
        let mut out = String::from("true\\pred");
        for p in 0..c {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
        for (r, row) in self.counts.iter().enumerate() {
            out.push_str(&r.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.counts.iter().flatten().map(|v| v.to_string().len()).max().unwrap_or(1).max(4);
        write!(f, "{:>9}", "true\\pred")?;
        for p in 0..self.num_classes() {
            write!(f, " {p:>width$}")?;
        }
        writeln!(f)?;
        for (r, row) in self.counts.iter().enumerate() {
            write!(f, "{r:>9}")?;
            for v in row {
                write!(f, " {v:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_accuracy: Vec<Option<f64>>,
}

/// Argmax prediction for every sample on un-augmented inputs.
pub fn predict<T: Scalar>(model: &MlpModel<T>, dataset: &Dataset<T>) -> Result<Vec<usize>> {
    if dataset.num_classes() > model.num_classes() {
        return Err(Error::config(format!(
            "dataset has {} classes, model outputs {}",
            dataset.num_classes(),
            model.num_classes()
        )));
    }
    let p = model.forward(&dataset.features())?;
    Ok((0..p.batch_size()).map(|i| p.argmax(i)).collect())
}

/// Accuracy and confusion of `model` against the dataset's observed labels.
pub fn evaluate<T: Scalar>(model: &MlpModel<T>, dataset: &Dataset<T>) -> Result<Evaluation> {
    let predicted = predict(model, dataset)?;
    evaluation_from_predictions(model.num_classes(), &dataset.observed_labels(), &predicted)
}

pub fn evaluation_from_predictions(num_classes: usize, reference: &[usize], predicted: &[usize]) -> Result<Evaluation> {
    if reference.is_empty() {
        return Err(Error::input("cannot evaluate on an empty set"));
    }
    let confusion = ConfusionMatrix::from_pairs(num_classes, reference, predicted)?;
    Ok(Evaluation { accuracy: confusion.accuracy(), per_class_accuracy: confusion.per_class_accuracy(), confusion })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionQuality {
    /// Clean-and-selected over selected.
    pub precision: Option<f64>,
    /// Clean-and-selected over clean.
    pub recall: Option<f64>,
    pub selected_fraction: f64,
}

/// Raw counts behind a [`SelectionQuality`], summable across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionCounts {
    pub total: usize,
    pub selected: usize,
    pub clean: usize,
    pub clean_selected: usize,
}

impl SelectionCounts {
    pub fn from_flags(selected: &[bool], flipped: &[bool]) -> Result<Self> {
        if selected.len() != flipped.len() {
            return Err(Error::input(format!("mask has {} entries but {} noise flags", selected.len(), flipped.len())));
        }
        let mut c = Self { total: selected.len(), ..Self::default() };
        for (&s, &f) in selected.iter().zip(flipped) {
            c.selected += usize::from(s);
            c.clean += usize::from(!f);
            c.clean_selected += usize::from(s && !f);
        }
        Ok(c)
    }

    pub fn add(&mut self, other: &Self) {
        self.total += other.total;
        self.selected += other.selected;
        self.clean += other.clean;
        self.clean_selected += other.clean_selected;
    }

    pub fn quality(&self) -> SelectionQuality {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        SelectionQuality {
            precision: ratio(self.clean_selected, self.selected),
            recall: ratio(self.clean_selected, self.clean),
            selected_fraction: ratio(self.selected, self.total).unwrap_or(0.0),
        }
    }
}

pub fn selection_quality(selected: &[bool], flipped: &[bool]) -> Result<SelectionQuality> {
    Ok(SelectionCounts::from_flags(selected, flipped)?.quality())
}

/// Fraction of flipped samples whose prediction equals their (wrong) observed label.
pub fn memorization_rate(predicted: &[usize], observed: &[usize], flipped: &[bool]) -> Option<f64> {
    let (hits, n) = predicted
        .iter()
        .zip(observed)
        .zip(flipped)
        .filter(|(_, &f)| f)
        .fold((0usize, 0usize), |(h, n), ((p, o), _)| (h + usize::from(p == o), n + 1));
    (n > 0).then(|| hits as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub epoch: usize,
    pub test_acc_a: f64,
    pub test_acc_b: f64,
    pub train_acc_a: f64,
    pub train_acc_b: f64,
    pub memorization_a: Option<f64>,
    pub memorization_b: Option<f64>,
}

/// Per-epoch juxtaposition of two runs over the same noisy training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<GapRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl GapReport {
    pub fn last(&self) -> Option<&GapRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let (a, b) = (&self.label_a, &self.label_b);
        let mut out =
            format!("epoch,{a}_train_acc,{b}_train_acc,{a}_test_acc,{b}_test_acc,{a}_memorization,{b}_memorization\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                r.epoch,
                r.train_acc_a,
                r.train_acc_b,
                r.test_acc_a,
                r.test_acc_b,
                fmt_opt(r.memorization_a),
                fmt_opt(r.memorization_b)
            ));
        }
        out
    }
}

impl fmt::Display for GapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = (&self.label_a, &self.label_b);
        let heads = [
            "epoch".to_string(),
            format!("{a} train"),
            format!("{b} train"),
            format!("{a} test"),
            format!("{b} test"),
            format!("{a} mem"),
            format!("{b} mem"),
        ];
        let w = heads.iter().map(String::len).max().unwrap_or(8).max(8);
        for h in &heads {
            write!(f, "{h:>w$} ")?;
        }
        writeln!(f)?;
        for r in &self.rows {
            write!(f, "{:>w$} ", r.epoch)?;
            for v in [r.train_acc_a, r.train_acc_b, r.test_acc_a, r.test_acc_b] {
                write!(f, "{:>w$} ", format!("{v:.6}"))?;
            }
            for v in [r.memorization_a, r.memorization_b] {
                write!(f, "{:>w$} ", fmt_opt(v))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Pair two runs epoch by epoch. Both must have trained on data with known noise flags.
pub fn memorization_trace(run_a: &RunMetrics, run_b: &RunMetrics) -> Result<GapReport> {
    memorization_trace_labeled(run_a, run_b, "a", "b")
}

pub fn memorization_trace_labeled(
    run_a: &RunMetrics,
    run_b: &RunMetrics,
    label_a: &str,
    label_b: &str,
) -> Result<GapReport> {
    if run_a.flipped_count.is_none() || run_b.flipped_count.is_none() {
        return Err(Error::input("memorization trace needs runs with known noise flags"));
    }
    if run_a.epochs.len() != run_b.epochs.len() {
        return Err(Error::input("runs cover different numbers of epochs"));
    }
    let rows = run_a
        .epochs
        .iter()
        .zip(&run_b.epochs)
        .map(|(a, b)| GapRow {
            epoch: a.epoch,
            test_acc_a: a.test_acc,
            test_acc_b: b.test_acc,
            train_acc_a: a.train_acc,
            train_acc_b: b.train_acc,
            memorization_a: a.memorization_rate,
            memorization_b: b.memorization_rate,
        })
        .collect();
    Ok(GapReport { label_a: label_a.into(), label_b: label_b.into(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let e = evaluation_from_predictions(3, &[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap();
        assert_eq!(e.accuracy, 1.0);
        let c = e.confusion.counts();
        for r in 0..3 {
            for p in 0..3 {
                assert_eq!(c[r][p] > 0, r == p);
            }
        }
    }

    #[test]
    fn three_of_four() {
        let e = evaluation_from_predictions(2, &[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
        assert_eq!(e.accuracy, 0.75);
        assert_eq!(e.per_class_accuracy, vec![Some(0.5), Some(1.0)]);
        assert_eq!(e.confusion.total(), 4);
        assert_eq!(e.confusion.trace(), 3);
    }

    #[test]
    fn absent_class_has_no_accuracy() {
        let e = evaluation_from_predictions(3, &[0, 1], &[0, 2]).unwrap();
        assert_eq!(e.per_class_accuracy[2], None);
        assert!(evaluation_from_predictions(3, &[], &[]).is_err());
    }

    #[test]
    fn csv_and_table_agree() {
        let m = ConfusionMatrix::from_pairs(2, &[0, 0, 1], &[0, 1, 1]).unwrap();
        assert_eq!(m.to_csv(), "true\\pred,0,1\n0,1,1\n1,0,1\n");
        let table = m.to_string();
        let nums: Vec<usize> =
            table.lines().skip(1).flat_map(|l| l.split_whitespace().skip(1)).map(|s| s.parse().unwrap()).collect();
        assert_eq!(nums, vec![1, 1, 0, 1]);
    }

    #[test]
    fn selection_quality_cases() {
        let flipped: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let all = selection_quality(&[true; 10], &flipped).unwrap();
        assert_eq!(all.precision, Some(0.7));
        assert_eq!(all.recall, Some(1.0));
        let clean: Vec<bool> = flipped.iter().map(|f| !f).collect();
        let exact = selection_quality(&clean, &flipped).unwrap();
        assert_eq!((exact.precision, exact.recall), (Some(1.0), Some(1.0)));
        let none = selection_quality(&[false; 10], &flipped).unwrap();
        assert_eq!(none.selected_fraction, 0.0);
        assert_eq!(none.precision, None);
        assert!(selection_quality(&[true; 3], &flipped).is_err());
    }

    #[test]
    fn memorization_rate_on_flipped_subset() {
        assert_eq!(memorization_rate(&[1, 0, 2], &[1, 0, 2], &[true, false, true]), Some(1.0));
        assert_eq!(memorization_rate(&[0, 0, 0], &[1, 0, 2], &[true, false, true]), Some(0.0));
        assert_eq!(memorization_rate(&[0], &[0], &[false]), None);
    }
}
