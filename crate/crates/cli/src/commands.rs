use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use dnfer_core::metrics::{evaluate, memorization_trace_labeled, GapReport, GapRow};
use dnfer_core::nn::checkpoint;
use dnfer_core::{Dataset, Mode, Split};

use crate::config::{DatasetKind, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::write_atomic;
use crate::run::{self, load_fixed, parallel_seeds, run_seed, train_into, write_seed_artifacts};
use crate::summary::{table, Stat, Summary};

pub fn train(cfg: &ExperimentConfig, out: &Path) -> CliResult<Summary> {
    let fixed = load_fixed(cfg)?;
    let summary = train_into(cfg, fixed.as_ref(), out)?;
    print!("{summary}");
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Sweep {
    Alpha,
    Warmup,
    Noise,
}

impl Sweep {
    fn key(self) -> &'static str {
        match self {
            Sweep::Alpha => "alpha",
            Sweep::Warmup => "warm_epochs",
            Sweep::Noise => "noise_rate",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Sweep::Alpha => "alpha",
            Sweep::Warmup => "warmup",
            Sweep::Noise => "noise",
        }
    }
}

pub fn ablate(cfg: &ExperimentConfig, sweep: Sweep, values: &[String], out: &Path) -> CliResult<Vec<Summary>> {
    if values.is_empty() {
        return Err(CliError::usage("--values needs at least one value"));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set(sweep.key(), v).map_err(CliError::usage)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let fixed = load_fixed(cfg)?;
    write_atomic(&out.join("config.txt"), cfg.to_text())?;
    let mut summaries = Vec::new();
    let mut csv = format!("{},mean_test_acc,std_test_acc,mean_memorization,std_memorization,repeats\n", sweep.name());
    let mut rows = Vec::new();
    for (value, c) in values.iter().zip(&configs) {
        let s = train_into(c, fixed.as_ref(), &out.join(format!("{}-{value}", sweep.name())))?;
        let (mm, ms) = s
            .memorization
            .as_ref()
            .map_or((String::new(), String::new()), |m| (format!("{:.6}", m.mean), format!("{:.6}", m.std)));
        csv.push_str(&format!("{value},{:.6},{:.6},{mm},{ms},{}\n", s.test_acc.mean, s.test_acc.std, s.repeats));
        rows.push(vec![
            value.clone(),
            s.test_acc.to_string(),
            s.memorization.as_ref().map_or_else(|| "n/a".into(), ToString::to_string),
        ]);
        summaries.push(s);
    }
    let text = table(&[sweep.name(), "test accuracy", "memorization"], &rows);
    write_atomic(&out.join(format!("sweep-{}.csv", sweep.name())), &csv)?;
    write_atomic(&out.join(format!("sweep-{}.txt", sweep.name())), &text)?;
    print!("{text}");
    Ok(summaries)
}

fn mean_opt(v: &[Option<f64>]) -> Option<f64> {
    Stat::from_options(v.iter().copied()).map(|s| s.mean)
}

/// Average paired curves over seeds, epoch by epoch.
fn average_reports(reports: &[GapReport]) -> GapReport {
    let first = &reports[0];
    let n = reports.len() as f64;
    let rows = (0..first.rows.len())
        .map(|i| {
            let col = |f: fn(&GapRow) -> f64| reports.iter().map(|r| f(&r.rows[i])).sum::<f64>() / n;
            let opt_col =
                |f: fn(&GapRow) -> Option<f64>| mean_opt(&reports.iter().map(|r| f(&r.rows[i])).collect::<Vec<_>>());
            GapRow {
                epoch: first.rows[i].epoch,
                test_acc_a: col(|r| r.test_acc_a),
                test_acc_b: col(|r| r.test_acc_b),
                train_acc_a: col(|r| r.train_acc_a),
                train_acc_b: col(|r| r.train_acc_b),
                memorization_a: opt_col(|r| r.memorization_a),
                memorization_b: opt_col(|r| r.memorization_b),
            }
        })
        .collect();
    GapReport { label_a: first.label_a.clone(), label_b: first.label_b.clone(), rows }
}

pub fn compare(cfg: &ExperimentConfig, out: &Path) -> CliResult<GapReport> {
    if cfg.noise_rate == 0.0 {
        eprintln!("warning: noise rate is 0, the flipped subset is empty and memorization columns stay blank");
    }
    let fixed = load_fixed(cfg)?;
    let with_mode =
        |mode: Mode| ExperimentConfig { train: dnfer_core::TrainConfig { mode, ..cfg.train.clone() }, ..cfg.clone() };
    let (base_cfg, dnfer_cfg) = (with_mode(Mode::Baseline), with_mode(Mode::Dnfer));
    write_atomic(&out.join("config.txt"), cfg.to_text())?;

    let reports = parallel_seeds(&run::seeds(cfg), |seed| {
        let base = run_seed(&base_cfg, fixed.as_ref(), seed)?;
        let dnfer = run_seed(&dnfer_cfg, fixed.as_ref(), seed)?;
        let report = memorization_trace_labeled(&base.outcome.metrics, &dnfer.outcome.metrics, "baseline", "dnfer")
            .map_err(|e| CliError::usage(format!("compare needs ground-truth labels for the training set: {e}")))?;
        let dir = out.join(format!("seed-{seed}"));
        write_seed_artifacts(&dir.join("baseline"), &base)?;
        write_seed_artifacts(&dir.join("dnfer"), &dnfer)?;
        write_atomic(&dir.join("compare.csv"), report.to_csv())?;
        write_atomic(&dir.join("compare.txt"), report.to_string())?;
        Ok(report)
    })?;
    let mean = average_reports(&reports);
    write_atomic(&out.join("compare.csv"), mean.to_csv())?;
    write_atomic(&out.join("compare.txt"), mean.to_string())?;
    print!("{mean}");
    Ok(mean)
}

/// Evaluation target: the configured test set, generated with the config seed for blobs.
fn eval_dataset(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    match cfg.dataset {
        DatasetKind::Blobs => Ok(cfg.blobs.generate::<f64>(cfg.train.seed)?.1),
        DatasetKind::Csv => {
            let p = cfg
                .paths
                .test_csv
                .as_ref()
                .or(cfg.paths.csv.as_ref())
                .ok_or_else(|| CliError::usage("eval needs --test-csv or --csv"))?;
            Ok(dnfer_core::data::io::load_csv(p, None, Split::Test)
                .with_context(|| format!("loading {}", p.display()))?)
        }
        DatasetKind::Idx => {
            let p = &cfg.paths;
            let pair = match (&p.test_idx_images, &p.test_idx_labels, &p.idx_images, &p.idx_labels) {
                (Some(i), Some(l), _, _) | (None, None, Some(i), Some(l)) => (i, l),
                _ => return Err(CliError::usage("eval needs an IDX image file and its label file")),
            };
            Ok(dnfer_core::data::io::load_idx(pair.0, pair.1, None, Split::Test).context("loading IDX files")?)
        }
    }
}

pub fn eval(cfg: &ExperimentConfig, checkpoint_path: &PathBuf, out: Option<&Path>) -> CliResult<f64> {
    let file = File::open(checkpoint_path).with_context(|| format!("opening {}", checkpoint_path.display()))?;
    let (model, _) = checkpoint::load::<f64, _>(&mut BufReader::new(file))
        .with_context(|| format!("reading {}", checkpoint_path.display()))?;
    let data = eval_dataset(cfg)?;
    let ev = evaluate(&model, &data)?;
    println!("accuracy {:.6} on {} samples", ev.accuracy, data.len());
    print!("{}", ev.confusion);
    if let Some(dir) = out {
        let json = serde_json::to_string_pretty(&ev).context("serializing evaluation")? + "\n";
        write_atomic(&dir.join("eval.json"), json)?;
        write_atomic(&dir.join("confusion.csv"), ev.confusion.to_csv())?;
    }
    Ok(ev.accuracy)
}
