//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{case, max_rel_error, naive_ce, naive_kl, random_probs, rng, views, REL_TOL};
use dnfer_core::data::io::{load_csv, load_idx};
use dnfer_core::dnfer::{
    compute_thresholds, consistency_loss, select_clean, supervision_loss, total_loss, Mode, SelectionMask,
};
use dnfer_core::metrics::evaluate;
use dnfer_core::nn::{backward, checkpoint, cross_entropy, lr_schedule, symmetric_kl, PosteriorMatrix};
use dnfer_core::{train, AugmentationPolicy, BlobsSpec, Dataset, NoiseSpec, RunMetrics, Split, TrainConfig};
use rand::seq::SliceRandom;
use rand::Rng;

const SEEDS: u64 = 5;
const MODES: [Mode; 4] = [Mode::Baseline, Mode::Dnfer, Mode::SupOnly, Mode::ConsOnly];

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_batch(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, usize) {
    let mut r = rng(seed);
    let c = r.random_range(2..=6);
    let b = r.random_range(1..=32);
    let p = random_probs(&mut r, b, c);
    let y = (0..b).map(|_| r.random_range(0..c)).collect();
    (p, y, c)
}

fn equation_oracles() -> Outcome {
    let trials = 200;
    let mut worst: f64 = 0.0;
    for seed in 0..trials {
        let (p, y, c) = random_batch(seed);
        let mut r = rng(seed ^ 0xABCD);
        let q = random_probs(&mut r, p.len(), c);
        let (pm, qm) = (PosteriorMatrix::from_rows(&p).unwrap(), PosteriorMatrix::from_rows(&q).unwrap());
        let b = p.len() as f64;

        let t = compute_thresholds(&pm, &y).map_err(|e| e.to_string())?;
        let mut brute_t = vec![None; c];
        for class in 0..c {
            let v: Vec<f64> = (0..y.len()).filter(|&i| y[i] == class).map(|i| p[i][class]).collect();
            if !v.is_empty() {
                brute_t[class] = Some(v.iter().sum::<f64>() / v.len() as f64);
                worst = worst.max((t.get(class).ok_or("missing threshold")? - brute_t[class].unwrap()).abs());
            } else {
                ensure(t.get(class).is_none(), || format!("seed {seed}: threshold for absent class {class}"))?;
            }
        }
        let mask = select_clean(&pm, &y, &t).map_err(|e| e.to_string())?;
        for i in 0..y.len() {
            ensure(mask.flags()[i] == (p[i][y[i]] >= brute_t[y[i]].unwrap()), || {
                format!("seed {seed}: selection differs at row {i}")
            })?;
        }

        let ce = cross_entropy(&pm, &y).unwrap().mean;
        worst = worst.max((ce - p.iter().zip(&y).map(|(row, &l)| naive_ce(row, l)).sum::<f64>() / b).abs());
        let skl = symmetric_kl(&pm, &qm).unwrap();
        let brute_skl = p.iter().zip(&q).map(|(a, c)| naive_kl(a, c) + naive_kl(c, a)).sum::<f64>() / b;
        worst = worst.max((skl - brute_skl).abs());
        worst = worst.max((consistency_loss(&pm, &qm).unwrap() - brute_skl).abs());

        let flags: Vec<bool> = (0..y.len()).map(|_| r.random_bool(0.5)).collect();
        let k = flags.iter().filter(|&&f| f).count();
        let brute_sup = if k == 0 {
            0.0
        } else {
            (0..y.len()).filter(|&i| flags[i]).map(|i| naive_ce(&p[i], y[i]) + naive_ce(&q[i], y[i])).sum::<f64>()
                / k as f64
        };
        let sup = supervision_loss(&pm, &qm, &y, &SelectionMask::from_flags(flags)).unwrap();
        worst = worst.max((sup - brute_sup).abs());
        let alpha: f64 = r.random_range(0.0..=1.0);
        let total = total_loss(alpha, sup, skl).unwrap();
        worst = worst.max((total - (alpha * brute_skl + (1.0 - alpha) * brute_sup)).abs());
    }
    ensure(worst < 1e-9, || format!("max abs error {worst:.3e}"))?;
    Ok(format!("{trials} batches, max abs error {worst:.2e}"))
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut r = rng(5000 + seed);
        let dims = [r.random_range(1..=3), r.random_range(2..=8), r.random_range(2..=4)];
        let b = r.random_range(1..=16);
        let c = case(seed, &dims, b);
        for alpha in [0.0, 0.5, 1.0] {
            let g = backward(&c.model, &views(&c), &c.selected, alpha).map_err(|e| e.to_string())?;
            let err = max_rel_error(&c, &g.params, alpha, true);
            worst = worst.max(err);
            ensure(err < REL_TOL, || format!("seed {seed} dims {dims:?} alpha {alpha}: rel err {err:.3e}"))?;
        }
    }
    Ok(format!("20 models x 3 alphas, max rel error {worst:.2e}"))
}

fn selection_invariants() -> Outcome {
    let trials = 2000u64;
    for seed in 0..trials {
        let (p, y, c) = random_batch(100_000 + seed);
        let pm = PosteriorMatrix::from_rows(&p).unwrap();
        let t = compute_thresholds(&pm, &y).unwrap();
        let mask = select_clean(&pm, &y, &t).unwrap();
        for class in 0..c {
            let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
            let Some(tc) = t.get(class) else { continue };
            ensure(tc > 0.0 && tc < 1.0, || format!("batch {seed}: T_{class} = {tc}"))?;
            ensure(members.iter().any(|&i| mask.flags()[i]), || format!("batch {seed}: class {class} emptied"))?;
            for &i in &members {
                for &j in &members {
                    ensure(!(mask.flags()[i] && p[j][class] >= p[i][class] && !mask.flags()[j]), || {
                        format!("batch {seed}: monotonicity broken")
                    })?;
                }
            }
        }
        let mut perm: Vec<usize> = (0..y.len()).collect();
        perm.shuffle(&mut rng(seed));
        let pp: Vec<Vec<f64>> = perm.iter().map(|&i| p[i].clone()).collect();
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let pmp = PosteriorMatrix::from_rows(&pp).unwrap();
        let mp = select_clean(&pmp, &yp, &compute_thresholds(&pmp, &yp).unwrap()).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            ensure(mp.flags()[j] == mask.flags()[i], || format!("batch {seed}: not permutation equivariant"))?;
        }
    }
    Ok(format!("{trials} batches, zero violations"))
}

/// Final metrics keyed by (noise percent, mode), one entry per seed.
type Runs = BTreeMap<(u32, Mode), Vec<RunMetrics>>;

fn run_benchmark(noise: f64, mode: Mode) -> Vec<RunMetrics> {
    (0..SEEDS)
        .map(|seed| {
            let (clean, test) = BlobsSpec::default().generate::<f64>(seed).unwrap();
            let train_set = if noise > 0.0 {
                dnfer_core::data::inject_noise(&clean, &NoiseSpec::symmetric(noise, seed).unwrap()).unwrap().dataset
            } else {
                clean
            };
            let cfg = TrainConfig { seed, mode, ..TrainConfig::default() };
            let policy = AugmentationPolicy::vector_default(train_set.feature_std());
            train(&train_set, &test, &cfg, &policy).unwrap().metrics
        })
        .collect()
}

fn benchmark_runs() -> (Runs, Duration) {
    let start = Instant::now();
    let runs = std::thread::scope(|s| {
        let handles: Vec<_> = [30u32, 0]
            .into_iter()
            .flat_map(|pct| MODES.map(|m| (pct, m)))
            .map(|(pct, mode)| ((pct, mode), s.spawn(move || run_benchmark(f64::from(pct) / 100.0, mode))))
            .collect();
        handles.into_iter().map(|(k, h)| (k, h.join().unwrap())).collect()
    });
    (runs, start.elapsed())
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_acc(runs: &Runs, pct: u32, mode: Mode) -> f64 {
    mean(runs[&(pct, mode)].iter().map(RunMetrics::final_test_acc))
}

fn noise_robustness(runs: &Runs) -> Outcome {
    let (base, dnfer) = (mean_acc(runs, 30, Mode::Baseline), mean_acc(runs, 30, Mode::Dnfer));
    let mem = |m: Mode| mean(runs[&(30, m)].iter().map(|r| r.final_memorization().unwrap()));
    let (base_mem, dnfer_mem) = (mem(Mode::Baseline), mem(Mode::Dnfer));
    let detail = format!(
        "acc dnfer {dnfer:.4} vs baseline {base:.4} (gap {:+.1} pp); memorization baseline {base_mem:.4} vs dnfer {dnfer_mem:.4} (gap {:+.1} pp)",
        100.0 * (dnfer - base),
        100.0 * (base_mem - dnfer_mem)
    );
    ensure(dnfer - base >= 0.03 && base_mem - dnfer_mem >= 0.10, || detail.clone())?;
    Ok(detail)
}

fn ablation(runs: &Runs) -> Outcome {
    let at30: Vec<String> = MODES[1..].iter().map(|&m| format!("{m} {:.4}", mean_acc(runs, 30, m))).collect();
    let clean: Vec<f64> = MODES.iter().map(|&m| mean_acc(runs, 0, m)).collect();
    let spread = clean.iter().cloned().fold(f64::MIN, f64::max) - clean.iter().cloned().fold(f64::MAX, f64::min);
    let detail = format!(
        "30% noise: {}; 0% noise: {} (spread {:.1} pp)",
        at30.join(", "),
        MODES.iter().zip(&clean).map(|(m, a)| format!("{m} {a:.4}")).collect::<Vec<_>>().join(", "),
        100.0 * spread
    );
    let d = mean_acc(runs, 30, Mode::Dnfer);
    let ok = d >= mean_acc(runs, 30, Mode::SupOnly) && d >= mean_acc(runs, 30, Mode::ConsOnly) && spread <= 0.03;
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn schedule_and_precision(runs: &Runs) -> Outcome {
    let cfg = TrainConfig::default();
    let mut precisions = Vec::new();
    for run in &runs[&(30, Mode::Dnfer)] {
        for e in &run.epochs {
            let want = if e.epoch < cfg.warm_epochs { 0.0 } else { cfg.alpha };
            ensure(e.alpha == want, || format!("epoch {} has alpha {}", e.epoch, e.alpha))?;
        }
        for s in &run.steps {
            let want = if s.epoch < cfg.warm_epochs { 0.0 } else { cfg.alpha };
            ensure(s.alpha == want, || format!("step in epoch {} has alpha {}", s.epoch, s.alpha))?;
        }
        let post: Vec<f64> = run.epochs[cfg.warm_epochs..].iter().filter_map(|e| e.selection_precision).collect();
        precisions.push(mean(post.into_iter()));
    }
    let p = mean(precisions.into_iter());
    ensure(p > 0.70, || format!("post-warm-up precision {p:.4}"))?;
    Ok(format!("alpha 0 before epoch {} then {}; post-warm-up precision {p:.4}", cfg.warm_epochs, cfg.alpha))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn determinism_and_formats() -> Outcome {
    let spec =
        BlobsSpec { train_counts: vec![120, 60, 20], test_counts: vec![30, 30, 30], dim: 16, ..BlobsSpec::default() };
    let (clean, test) = spec.generate::<f64>(7).unwrap();
    let noisy = dnfer_core::data::inject_noise(&clean, &NoiseSpec::symmetric(0.3, 7).unwrap()).unwrap().dataset;
    let cfg = TrainConfig { max_epochs: 8, batch_size: 32, seed: 7, ..TrainConfig::default() };
    let policy = AugmentationPolicy::vector_default(noisy.feature_std());
    let a = train(&noisy, &test, &cfg, &policy).map_err(|e| e.to_string())?;
    let b = train(&noisy, &test, &cfg, &policy).map_err(|e| e.to_string())?;
    ensure(a.metrics.to_jsonl() == b.metrics.to_jsonl(), || "RunMetrics differ between identical runs".into())?;

    let mut bytes = Vec::new();
    checkpoint::save(&mut bytes, &a.model, Some(&a.optimizer)).map_err(|e| e.to_string())?;
    let (model, _) = checkpoint::load::<f64, _>(&mut bytes.as_slice()).map_err(|e| e.to_string())?;
    let acc = evaluate(&model, &test).unwrap().accuracy;
    ensure(acc == a.metrics.final_test_acc(), || format!("reloaded accuracy {acc} != {}", a.metrics.final_test_acc()))?;

    let csv: Dataset = load_csv(fixture("tiny.csv"), None, Split::Train).map_err(|e| e.to_string())?;
    ensure(csv.len() == 4 && csv.samples()[1].features == [1e-3, 2.0, -0.75], || "CSV fixture mismatch".into())?;
    let idx: Dataset =
        load_idx(fixture("tiny-images.idx3-ubyte"), fixture("tiny-labels.idx1-ubyte"), None, Split::Train)
            .map_err(|e| e.to_string())?;
    ensure(idx.len() == 3 && idx.observed_labels() == [7, 0, 3] && idx.samples()[0].features[1] == 1.0, || {
        "IDX fixture mismatch".into()
    })?;
    Ok(format!("byte-identical metrics, checkpoint accuracy {acc:.4} reproduced, fixtures parsed"))
}

fn defaults() -> Outcome {
    let cfg = TrainConfig::default();
    for e in 0..40 {
        let want = 0.001 * 0.95f64.powi(e as i32);
        ensure((lr_schedule(0.001, e) - want).abs() <= 1e-18, || format!("lr at epoch {e}"))?;
    }
    ensure(cfg.batch_size == 128 && cfg.warm_epochs == 5 && cfg.alpha == 0.5 && cfg.initial_lr == 0.001, || {
        format!("{cfg:?}")
    })?;
    Ok("lr 0.001*0.95^e, batch 128, warm-up 5, alpha 0.5".into())
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, (res, took): (Outcome, Duration), budget: Option<Duration>| {
        let over = budget.filter(|b| took > *b);
        let (tag, detail) = match (&res, over) {
            (Ok(d), None) => ("PASS", d.clone()),
            (Ok(d), Some(b)) => ("FAIL", format!("{d}; exceeded {b:?} budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("[{tag}] criterion {n} {name}: {detail} ({:.1} s)", took.as_secs_f64());
    };

    report(1, "equation oracles", timed(equation_oracles), Some(Duration::from_secs(10)));
    report(2, "gradient correctness", timed(gradient_check), Some(Duration::from_secs(30)));
    report(3, "selection invariants", timed(selection_invariants), None);
    let (runs, took) = benchmark_runs();
    report(4, "noise robustness", (noise_robustness(&runs), took), Some(Duration::from_secs(300)));
    report(5, "component ablation", (ablation(&runs), took), Some(Duration::from_secs(600)));
    report(6, "schedule and selection precision", timed(|| schedule_and_precision(&runs)), None);
    report(7, "determinism and formats", timed(determinism_and_formats), None);
    report(8, "hyperparameter defaults", timed(defaults), None);

    if failed == 0 {
        println!("acceptance: all 8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria failed");
        ExitCode::FAILURE
    }
}
