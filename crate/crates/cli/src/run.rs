use std::path::Path;
use std::thread;

use anyhow::Context;
use dnfer_core::data::inject_noise;
use dnfer_core::data::io::{load_csv, load_idx, write_noise_mask};
use dnfer_core::nn::checkpoint;
use dnfer_core::{train, AugmentationPolicy, Dataset, NoiseSpec, RunMetrics, Split, TrainConfig, TrainOutcome};

use crate::config::{DatasetKind, ExperimentConfig};
use crate::error::CliResult;
use crate::output::write_atomic;
use crate::summary::Summary;

/// Train and test sets read from disk once and shared by every repeat.
pub struct FixedData {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_fixed(cfg: &ExperimentConfig) -> CliResult<Option<FixedData>> {
    let p = &cfg.paths;
    let required = |o: &Option<std::path::PathBuf>| o.clone().expect("validated before loading");
    let (train, test) = match cfg.dataset {
        DatasetKind::Blobs => return Ok(None),
        DatasetKind::Csv => {
            let (tr, te) = (required(&p.csv), required(&p.test_csv));
            let train: Dataset =
                load_csv(&tr, None, Split::Train).with_context(|| format!("loading {}", tr.display()))?;
            let test: Dataset =
                load_csv(&te, None, Split::Test).with_context(|| format!("loading {}", te.display()))?;
            (train, test)
        }
        DatasetKind::Idx => {
            let train: Dataset = load_idx(required(&p.idx_images), required(&p.idx_labels), None, Split::Train)
                .context("loading training IDX files")?;
            let test: Dataset = load_idx(required(&p.test_idx_images), required(&p.test_idx_labels), None, Split::Test)
                .context("loading test IDX files")?;
            (train, test)
        }
    };
    Ok(Some(FixedData { train, test }))
}

/// The (possibly noisy) training set and the test set for one seed.
pub fn datasets_for_seed(
    cfg: &ExperimentConfig,
    fixed: Option<&FixedData>,
    seed: u64,
) -> CliResult<(Dataset, Dataset)> {
    let (train_set, test_set) = match fixed {
        Some(f) => (f.train.clone(), f.test.clone()),
        None => cfg.blobs.generate::<f64>(seed)?,
    };
    if cfg.noise_rate > 0.0 {
        let noisy = inject_noise(&train_set, &NoiseSpec::symmetric(cfg.noise_rate, seed)?)?;
        return Ok((noisy.dataset, test_set));
    }
    Ok((train_set, test_set))
}

pub fn policy_for(cfg: &ExperimentConfig, train_set: &Dataset) -> CliResult<AugmentationPolicy> {
    let policy =
        cfg.augmentation.apply(AugmentationPolicy::for_modality(train_set.modality(), train_set.feature_std()));
    policy.validate(train_set.modality())?;
    Ok(policy)
}

pub struct SeedRun {
    pub seed: u64,
    pub outcome: TrainOutcome,
    pub train_set: Dataset,
}

pub fn run_seed(cfg: &ExperimentConfig, fixed: Option<&FixedData>, seed: u64) -> CliResult<SeedRun> {
    let (train_set, test_set) = datasets_for_seed(cfg, fixed, seed)?;
    let policy = policy_for(cfg, &train_set)?;
    let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
    let outcome = train(&train_set, &test_set, &train_cfg, &policy)?;
    Ok(SeedRun { seed, outcome, train_set })
}

/// Seeds `seed, seed + 1, ...`, one per repeat.
pub fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.repeats as u64).map(|k| cfg.train.seed.wrapping_add(k)).collect()
}

/// Run `job` for every seed on a bounded pool of scoped threads; results keep seed order.
pub fn parallel_seeds<R: Send>(seeds: &[u64], job: impl Fn(u64) -> CliResult<R> + Sync) -> CliResult<Vec<R>> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, seeds.len().max(1));
    let job = &job;
    let mut tagged: Vec<(usize, CliResult<R>)> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    seeds
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, &seed)| (i, job(seed)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    });
    tagged.sort_by_key(|(i, _)| *i);
    tagged.into_iter().map(|(_, r)| r).collect()
}

pub fn run_repeats(cfg: &ExperimentConfig, fixed: Option<&FixedData>) -> CliResult<Vec<SeedRun>> {
    parallel_seeds(&seeds(cfg), |seed| run_seed(cfg, fixed, seed))
}

/// `metrics.jsonl`, `model.ckpt`, `confusion.csv` and, when flips are known, `noise_mask.csv`.
pub fn write_seed_artifacts(dir: &Path, run: &SeedRun) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let metrics = &run.outcome.metrics;
    write_atomic(&dir.join("metrics.jsonl"), metrics.to_jsonl())?;
    let mut ckpt = Vec::new();
    checkpoint::save(&mut ckpt, &run.outcome.model, Some(&run.outcome.optimizer))?;
    write_atomic(&dir.join("model.ckpt"), ckpt)?;
    write_atomic(&dir.join("confusion.csv"), metrics.final_record.confusion.to_csv())?;
    if let Some(flags) = run.train_set.flipped_flags() {
        let ids: Vec<usize> = run.train_set.samples().iter().map(|s| s.sample_id).collect();
        let mut mask = Vec::new();
        write_noise_mask(&mut mask, &ids, &flags)?;
        write_atomic(&dir.join("noise_mask.csv"), mask)?;
    }
    Ok(())
}

/// Full `train` command body: artifacts for every seed plus a summary.
pub fn train_into(cfg: &ExperimentConfig, fixed: Option<&FixedData>, out: &Path) -> CliResult<Summary> {
    write_atomic(&out.join("config.txt"), cfg.to_text())?;
    let runs = run_repeats(cfg, fixed)?;
    for run in &runs {
        write_seed_artifacts(&out.join(format!("seed-{}", run.seed)), run)?;
    }
    let metrics: Vec<(u64, &RunMetrics)> = runs.iter().map(|r| (r.seed, &r.outcome.metrics)).collect();
    let summary = Summary::from_runs(cfg, &metrics);
    write_atomic(&out.join("summary.json"), summary.to_json())?;
    write_atomic(&out.join("summary.txt"), summary.to_string())?;
    Ok(summary)
}
