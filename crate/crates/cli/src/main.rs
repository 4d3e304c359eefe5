//! `dnfer`: train, ablate, compare and evaluate noisy-label classifiers.

mod commands;
mod config;
mod error;
mod output;
mod run;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dnfer_core::{Mode, SelectionView};

use crate::commands::Sweep;
use crate::config::{DatasetKind, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::default_out_dir;

#[derive(Parser)]
#[command(name = "dnfer", version, about = "Noisy-label training with class-adaptive clean-sample selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one mode over `--repeats` seeds and summarize.
    Train(RunArgs),
    /// Repeat training over a list of values for one parameter.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        sweep: Sweep,
        /// Comma-separated values for the swept parameter.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Train baseline and dnfer on shared seeds and report memorization side by side.
    Compare(RunArgs),
    /// Evaluate a checkpoint on a dataset's test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write eval.json and confusion.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Args, Default)]
struct DataArgs {
    /// Use the generated Gaussian blobs benchmark (the default).
    #[arg(long)]
    blobs: bool,
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    test_csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    idx_images: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    idx_labels: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    test_idx_images: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    test_idx_labels: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(Mode))]
    mode: Option<Mode>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    warm_epochs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    oversample: bool,
    #[arg(long, value_parser = clap::value_parser!(SelectionView))]
    selection_view: Option<SelectionView>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

impl DataArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> CliResult<()> {
        let sources = [self.blobs, self.csv.is_some(), self.idx_images.is_some() || self.idx_labels.is_some()];
        if sources.iter().filter(|&&s| s).count() > 1 {
            return Err(CliError::usage("choose one of --blobs, --csv and --idx-images/--idx-labels"));
        }
        let p = &mut cfg.paths;
        if self.blobs {
            cfg.dataset = DatasetKind::Blobs;
        }
        if let Some(v) = &self.csv {
            cfg.dataset = DatasetKind::Csv;
            p.csv = Some(v.clone());
        }
        if self.idx_images.is_some() || self.idx_labels.is_some() {
            cfg.dataset = DatasetKind::Idx;
        }
        for (src, dst) in [
            (&self.test_csv, &mut p.test_csv),
            (&self.idx_images, &mut p.idx_images),
            (&self.idx_labels, &mut p.idx_labels),
            (&self.test_idx_images, &mut p.test_idx_images),
            (&self.test_idx_labels, &mut p.test_idx_labels),
        ] {
            if let Some(v) = src {
                *dst = Some(v.clone());
            }
        }
        Ok(())
    }
}

fn base_config(path: Option<&PathBuf>) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = path {
        cfg.apply_file(p)?;
    }
    Ok(cfg)
}

impl RunArgs {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = base_config(self.config.as_ref())?;
        let t = &mut cfg.train;
        if let Some(v) = self.mode {
            t.mode = v;
        }
        if let Some(v) = self.alpha {
            t.alpha = v;
        }
        if let Some(v) = self.warm_epochs {
            t.warm_epochs = v;
        }
        if let Some(v) = self.epochs {
            t.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = self.lr {
            t.initial_lr = v;
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if self.oversample {
            t.oversample = true;
        }
        if let Some(v) = self.selection_view {
            t.selection_view = v;
        }
        if let Some(v) = self.noise_rate {
            cfg.noise_rate = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        self.data.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| default_out_dir(name))
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            commands::train(&cfg, &out_dir(&cfg, &format!("train-{}", cfg.train.mode)))?;
        }
        Command::Ablate { run, sweep, values } => {
            let cfg = run.resolve()?;
            let name = format!("ablate-{}", format!("{sweep:?}").to_lowercase());
            commands::ablate(&cfg, sweep, &values, &out_dir(&cfg, &name))?;
        }
        Command::Compare(args) => {
            let cfg = args.resolve()?;
            commands::compare(&cfg, &out_dir(&cfg, "compare"))?;
        }
        Command::Eval { checkpoint, config, seed, out, data } => {
            let mut cfg = base_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            data.apply(&mut cfg)?;
            commands::eval(&cfg, &checkpoint, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `dnfer --help` for usage");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
