//! Command-line surface, run configuration, checkpoints and the study driver.

mod checkpoint;
pub mod commands;
mod config;
mod gradcheck;
pub mod study;

pub use checkpoint::{Checkpoint, CheckpointModel, TrainingSummary, CHECKPOINT_VERSION, HEAD_KIND};
pub use config::{RunConfig, StudyConfig};
pub use gradcheck::{format_gradcheck, gradcheck_suite, GradCheckEntry, GRADCHECK_TOLERANCE};
pub use study::{run_seed, run_study, stage_seed, summarize, SeedRecord, StudyOutcome, StudySummary, ENSEMBLE_NAME};

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::io::write_atomic;
use crate::data::{read_dataset, read_logits, write_logits, DatasetSplit, LogitSet};
use crate::error::{Error, Result};
use crate::eval::roc_curve;
use crate::layers::TrunkPreset;
use commands::*;

#[derive(Debug, Parser)]
#[command(name = "mase", version, about = "Multi-attention stacked ensemble for imbalanced binary classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file of overrides on the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; per-stage seeds are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Average logits over test-time views (`--tta=false` disables).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub tta: Option<bool>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic train/val/test patch files.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Benign:malignant ratio applied to every split, e.g. `1:1`.
        #[arg(long)]
        ratio: Option<String>,
    },
    /// Train one base model.
    TrainBase {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trunk: TrunkPreset,
        /// Directory holding train/val/test.jsonl.
        #[arg(long)]
        data: PathBuf,
    },
    /// Write per-model logits for a dataset file.
    ExportLogits {
        #[command(flatten)]
        common: Common,
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        /// A dataset `.jsonl` file.
        #[arg(long)]
        data: PathBuf,
    },
    /// Train the fusion head on base-model logits.
    TrainEnsemble {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "val_logits")]
        train_logits: Option<PathBuf>,
        #[arg(long)]
        val_logits: Option<PathBuf>,
        /// Base checkpoints, used with `--data` instead of logit files.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        /// Directory holding train/val/test.jsonl.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Print metrics for a base model or a fusion head.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Base checkpoints feeding a fusion head.
        #[arg(long = "base")]
        bases: Vec<PathBuf>,
        /// A dataset `.jsonl` file.
        #[arg(long)]
        data: Option<PathBuf>,
        /// A logit file, for fusion heads without base checkpoints.
        #[arg(long)]
        logits: Option<PathBuf>,
        /// Write ROC points as `fpr,tpr` lines.
        #[arg(long)]
        roc_out: Option<PathBuf>,
    },
    /// Wilcoxon signed-rank tests of paired per-run accuracies.
    Significance {
        #[command(flatten)]
        common: Common,
        /// JSON lines with `seed_index` and an `accuracy` map.
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = ENSEMBLE_NAME)]
        reference: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Family size for the correction (defaults to the number of baselines).
        #[arg(long)]
        bonferroni: Option<usize>,
    },
    /// Full multi-seed experiment.
    Study {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Use the short desk-scale epoch budget as the base config.
        #[arg(long)]
        desk_scale: bool,
    },
    /// Finite-difference check of every layer, loss and the fusion head.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common, base: RunConfig) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            base.with_overrides(&text).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        None => base,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(tta) = common.tta {
        cfg.use_tta = tta;
    }
    Ok(cfg)
}

fn require_out(common: &Common) -> Result<&Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn parse_ratio(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("ratio must look like '4:1', got '{text}'"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn load_checkpoints(paths: &[PathBuf]) -> Result<Vec<Checkpoint>> {
    paths.iter().map(Checkpoint::load).collect()
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Executes one command, writing human-readable output to `w`.
pub fn execute(command: Command, w: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenData { common, ratio } => {
            let mut cfg = resolve(&common, RunConfig::default())?;
            if let Some(seed) = common.seed {
                cfg.data.seed = seed;
            }
            if let Some(r) = ratio {
                cfg.data = cfg.data.with_ratio(parse_ratio(&r)?)?;
            }
            let split = gen_data(&cfg, Some(require_out(&common)?))?;
            write!(w, "{}", format_counts(&split)).map_err(io_err)
        }
        Command::TrainBase { common, trunk, data } => {
            let cfg = resolve(&common, RunConfig::default())?;
            let out = require_out(&common)?;
            let split = DatasetSplit::read_dir(&data)?;
            let trained = train_base(
                trunk,
                &split,
                &cfg,
                stage_seed(cfg.seed, &format!("init-{trunk}"), 0),
                stage_seed(cfg.seed, &format!("train-{trunk}"), 0),
            )?;
            trained.checkpoint.save(out.join(format!("{trunk}.json")))?;
            write_log(&out.join(format!("{trunk}.log.jsonl")), &trained.outcome.log)?;
            writeln!(
                w,
                "{trunk}: best val accuracy {:.4} at epoch {} ({} epochs run)",
                trained.outcome.best_val_accuracy,
                trained.outcome.best_epoch,
                trained.outcome.log.len()
            )
            .map_err(io_err)
        }
        Command::ExportLogits { common, checkpoints, data } => {
            let cfg = resolve(&common, RunConfig { use_tta: false, ..RunConfig::default() })?;
            let bases = named_bases(&load_checkpoints(&checkpoints)?)?;
            let samples = read_dataset(&data)?;
            let set = export_logits(&bases, &samples, cfg.use_tta.then_some(&cfg.tta))?;
            write_logits(require_out(&common)?, &set)?;
            writeln!(w, "wrote {} records for models {:?}", set.len(), set.models).map_err(io_err)
        }
        Command::TrainEnsemble {
            common,
            train_logits,
            val_logits,
            checkpoints,
            data,
        } => {
            let cfg = resolve(&common, RunConfig::default())?;
            let out = require_out(&common)?;
            let (train, val): (LogitSet, LogitSet) = match (train_logits, val_logits, data) {
                (Some(t), Some(v), None) => (read_logits(t)?, read_logits(v)?),
                (None, None, Some(dir)) => {
                    let bases = named_bases(&load_checkpoints(&checkpoints)?)?;
                    let split = DatasetSplit::read_dir(dir)?;
                    let tta = cfg.use_tta.then_some(&cfg.tta);
                    (export_logits(&bases, &split.train, tta)?, export_logits(&bases, &split.val, tta)?)
                }
                _ => {
                    return Err(Error::Config(
                        "give either --train-logits and --val-logits, or --checkpoint with --data".into(),
                    ))
                }
            };
            let (ck, outcome) = train_head(
                &train,
                &val,
                &cfg,
                stage_seed(cfg.seed, "init-head", 0),
                stage_seed(cfg.seed, "train-head", 0),
            )?;
            ck.save(out.join("head.json"))?;
            write_log(&out.join("head.log.jsonl"), &outcome.log)?;
            writeln!(
                w,
                "fusion head over {:?}: best val accuracy {:.4} at epoch {}",
                train.models, outcome.best_val_accuracy, outcome.best_epoch
            )
            .map_err(io_err)
        }
        Command::Evaluate {
            common,
            checkpoint,
            bases,
            data,
            logits,
            roc_out,
        } => {
            let cfg = resolve(&common, RunConfig { use_tta: false, ..RunConfig::default() })?;
            let tta = cfg.use_tta.then_some(&cfg.tta);
            let ck = Checkpoint::load(&checkpoint)?;
            let (report, scores, labels) = match (&ck.model, data, logits) {
                (CheckpointModel::Base(model), Some(d), None) => {
                    let samples = read_dataset(d)?;
                    let l = base_logits(model, &samples, tta)?;
                    let y = crate::data::labels(&samples);
                    (crate::eval::metrics_from_logits(&l, &y)?, crate::eval::positive_probabilities(&l)?, y)
                }
                (CheckpointModel::MaseHead(_), data, logits) => {
                    let set = match (data, logits) {
                        (None, Some(l)) => read_logits(l)?,
                        (Some(d), None) => {
                            let named = named_bases(&load_checkpoints(&bases)?)?;
                            export_logits(&named, &read_dataset(d)?, tta)?
                        }
                        _ => return Err(Error::Config("give exactly one of --data or --logits".into())),
                    };
                    let report = evaluate_head(&ck, &set)?;
                    let head = ck.as_head()?;
                    let stacked = crate::ensemble::StackedLogits::from_logit_set(&set)?;
                    let fused = crate::ensemble::fuse(&stacked, head, &mut crate::layers::ForwardCtx::eval())?;
                    (report, crate::eval::positive_probabilities(&fused)?, set.labels())
                }
                _ => return Err(Error::Config("a base checkpoint needs --data and no --logits".into())),
            };
            if let Some(path) = roc_out {
                let pts = roc_curve(&scores, &labels)?;
                let text: String = pts.iter().map(|(f, t)| format!("{f},{t}\n")).collect();
                write_atomic(&path, &text)?;
            }
            if let Some(out) = &common.out {
                write_atomic(out, &(report.to_json_line() + "\n"))?;
            }
            writeln!(w, "{}", report.table()).map_err(io_err)?;
            writeln!(w, "{}", report.to_json_line()).map_err(io_err)
        }
        Command::Significance {
            common,
            results,
            reference,
            alpha,
            bonferroni,
        } => {
            let records = read_paired(&results)?;
            let report = significance(&records, &reference, alpha, bonferroni, false)?;
            if let Some(out) = &common.out {
                write_atomic(out, &(serde_json::to_string(&report).expect("report serializes") + "\n"))?;
            }
            write!(w, "{}", report.table()).map_err(io_err)
        }
        Command::Study {
            common,
            seeds,
            workers,
            desk_scale,
        } => {
            let base = if desk_scale { RunConfig::desk_scale() } else { RunConfig::default() };
            let mut cfg = resolve(&common, base)?;
            if let Some(s) = seeds {
                cfg.study.seeds = s;
            }
            if let Some(n) = workers {
                cfg.study.workers = n;
            }
            let outcome = run_study(&cfg, common.out.as_deref())?;
            write!(w, "{}", outcome.summary.table()).map_err(io_err)
        }
        Command::Gradcheck { common } => {
            let entries = gradcheck_suite(common.seed.unwrap_or(0))?;
            write!(w, "{}", format_gradcheck(&entries)).map_err(io_err)?;
            let failed: Vec<&str> = entries.iter().filter(|e| !e.passed).map(|e| e.component.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Numeric(format!("gradient check failed for {failed:?}")))
            }
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
