use std::fmt;

use dnfer_core::RunMetrics;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Mean and sample standard deviation (zero for a single value).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Stat {
    pub fn new(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std, values }
    }

    /// `None` unless every value is present.
    pub fn from_options(values: impl IntoIterator<Item = Option<f64>>) -> Option<Self> {
        let v: Option<Vec<f64>> = values.into_iter().collect();
        v.filter(|v| !v.is_empty()).map(Self::new)
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: String,
    pub noise_rate: f64,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub test_acc: Stat,
    /// Final accuracy on the flipped subset against the wrong labels.
    pub memorization: Option<Stat>,
    /// Mean selection precision over the epochs after warm-up.
    pub selection_precision: Option<Stat>,
}

fn post_warm_precision(run: &RunMetrics, warm: usize) -> Option<f64> {
    let v: Vec<f64> = run.epochs.iter().skip(warm).filter_map(|e| e.selection_precision).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl Summary {
    pub fn from_runs(cfg: &ExperimentConfig, runs: &[(u64, &RunMetrics)]) -> Self {
        let warm = cfg.train.warm_epochs;
        Self {
            mode: cfg.train.mode.to_string(),
            noise_rate: cfg.noise_rate,
            repeats: runs.len(),
            seeds: runs.iter().map(|(s, _)| *s).collect(),
            test_acc: Stat::new(runs.iter().map(|(_, r)| r.final_test_acc()).collect()),
            memorization: Stat::from_options(runs.iter().map(|(_, r)| r.final_memorization())),
            selection_precision: Stat::from_options(runs.iter().map(|(_, r)| post_warm_precision(r, warm))),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

fn opt(s: &Option<Stat>) -> String {
    s.as_ref().map_or_else(|| "n/a".to_string(), ToString::to_string)
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode                 {}", self.mode)?;
        writeln!(f, "noise rate           {}", self.noise_rate)?;
        writeln!(f, "repeats              {} (seeds {:?})", self.repeats, self.seeds)?;
        writeln!(f, "test accuracy        {}", self.test_acc)?;
        writeln!(f, "memorization         {}", opt(&self.memorization))?;
        writeln!(f, "selection precision  {}", opt(&self.selection_precision))?;
        write!(f, "per seed accuracy   ")?;
        for v in &self.test_acc.values {
            write!(f, " {v:.4}")?;
        }
        writeln!(f)
    }
}

/// Fixed-width text table with a header row.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_standard_deviation() {
        let s = Stat::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(Stat::new(vec![0.7]).std, 0.0);
        assert!(Stat::from_options([Some(1.0), None]).is_none());
    }

    #[test]
    fn table_aligns_columns() {
        let t = table(&["a", "value"], &[vec!["10".into(), "x".into()]]);
        assert_eq!(t, " a  value\n--  -----\n10      x\n");
    }
}
