//! Library forms of the command-line operations.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, RunConfig, TrainingSummary};
use crate::autodiff::{RngState, Tensor};
use crate::data::io::{to_lines, write_atomic};
use crate::data::{
    augment_train, generate_synthetic, labels, patch_matrix, AugmentConfig, DatasetSplit, LogitSet, Patch,
    PatchSample, TtaConfig,
};
use crate::ensemble::{fuse, stack_tta_logits, train_ensemble, StackedLogits};
use crate::error::{Error, Result};
use crate::eval::{
    bonferroni, metrics_from_logits, wilcoxon_signed_rank, BonferroniResult, MetricsReport, WilcoxonResult,
};
use crate::layers::{BaseModel, ForwardCtx, TrunkPreset};
use crate::optim::{train_model, EpochRecord, Examples, TrainOutcome};

/// Generates the synthetic splits and, when `out` is given, writes them there.
pub fn gen_data(cfg: &RunConfig, out: Option<&Path>) -> Result<DatasetSplit> {
    let split = generate_synthetic(&cfg.data)?;
    if let Some(dir) = out {
        split.write_dir(dir)?;
    }
    Ok(split)
}

/// One line per split: `train benign=4342 malignant=845`.
pub fn format_counts(split: &DatasetSplit) -> String {
    let mut s = String::new();
    for (name, [b, m]) in ["train", "val", "test"].into_iter().zip(split.counts()) {
        let _ = writeln!(s, "{name:<5} benign={b} malignant={m}");
    }
    s
}

pub fn examples_of(samples: &[PatchSample]) -> Result<Examples> {
    Examples::new(patch_matrix(samples)?, labels(samples))
}

/// Flattened-row form of [`augment_train`] for `h × w` patches.
pub fn row_augmenter(h: usize, w: usize, cfg: AugmentConfig) -> impl Fn(&[f64], &mut RngState) -> Vec<f64> + Sync {
    move |row, rng| {
        let p = Patch {
            height: h,
            width: w,
            pixels: row.to_vec(),
        };
        augment_train(&p, &cfg, rng).pixels
    }
}

/// A trained base model with its per-epoch log.
#[derive(Debug, Clone)]
pub struct TrainedBase {
    pub checkpoint: Checkpoint,
    pub outcome: TrainOutcome,
}

/// Trains one base model on `split.train`, early-stopping on `split.val`.
pub fn train_base(
    preset: TrunkPreset,
    split: &DatasetSplit,
    cfg: &RunConfig,
    init_seed: u64,
    train_seed: u64,
) -> Result<TrainedBase> {
    let (h, w) = split
        .patch_shape()
        .ok_or_else(|| Error::Config("dataset is empty".into()))?;
    let mut model = BaseModel::new(preset, h, w, 2, &mut RngState::new(init_seed));
    let train = examples_of(&split.train)?;
    let val = examples_of(&split.val)?;
    let mut tcfg = cfg.base.clone();
    tcfg.seed = train_seed;
    let augment = row_augmenter(h, w, cfg.augment.clone());
    let outcome = train_model(&mut model, &train, &val, &tcfg, Some(&augment))?;
    let summary = TrainingSummary::from(&outcome);
    Ok(TrainedBase {
        checkpoint: Checkpoint::base(model, cfg.clone(), init_seed, train_seed, Some(summary)),
        outcome,
    })
}

/// Per-epoch log as JSON lines.
pub fn log_lines(log: &[EpochRecord]) -> String {
    to_lines(log)
}

pub fn write_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    write_atomic(path, &log_lines(log))
}

/// Names base checkpoints by trunk id, refusing duplicates and mixed class counts.
pub fn named_bases(checkpoints: &[Checkpoint]) -> Result<Vec<(String, BaseModel)>> {
    let mut out: Vec<(String, BaseModel)> = Vec::with_capacity(checkpoints.len());
    for ck in checkpoints {
        let model = ck.as_base()?.clone();
        if out.iter().any(|(n, _)| *n == ck.kind) {
            return Err(Error::Config(format!("model '{}' appears more than once", ck.kind)));
        }
        if let Some((_, first)) = out.first() {
            if first.head.classes() != model.head.classes() {
                return Err(Error::Config(format!(
                    "checkpoints disagree on class count: {} vs {}",
                    first.head.classes(),
                    model.head.classes()
                )));
            }
        }
        out.push((ck.kind.clone(), model));
    }
    Ok(out)
}

/// Eval-mode logits of each base for `samples`, averaged over `tta` views
/// when given, in logit-file form.
pub fn export_logits(bases: &[(String, BaseModel)], samples: &[PatchSample], tta: Option<&TtaConfig>) -> Result<LogitSet> {
    let identity = TtaConfig::identity_only();
    let tta = tta.unwrap_or(&identity);
    let patches: Vec<Patch> = samples.iter().map(|s| s.patch.clone()).collect();
    let stacked = if bases.len() >= 2 {
        stack_tta_logits(bases, &patches, tta)?
    } else {
        // A single model is exported as-is; fusion later refuses it.
        let (name, m) = bases.first().ok_or_else(|| Error::Config("no base checkpoints given".into()))?;
        let t = crate::ensemble::tta_logits(m, &patches, tta)?;
        let (n, c) = (t.rows(), t.last_dim());
        StackedLogits {
            models: vec![name.clone()],
            tensor: t.reshape(&[n, 1, c])?,
        }
    };
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    stacked.to_logit_set(&ids, &labels(samples))
}

/// Trains the fusion head from logit files alone.
pub fn train_head(
    train: &LogitSet,
    val: &LogitSet,
    cfg: &RunConfig,
    init_seed: u64,
    train_seed: u64,
) -> Result<(Checkpoint, TrainOutcome)> {
    if train.models.len() < 2 {
        return Err(Error::Config(format!(
            "ensemble training needs at least 2 base models, got {}",
            train.models.len()
        )));
    }
    let mut tcfg = cfg.head.clone();
    tcfg.seed = train_seed;
    let (head, outcome) = train_ensemble(train, val, &tcfg, init_seed)?;
    let summary = TrainingSummary::from(&outcome);
    Ok((Checkpoint::head(head, cfg.clone(), init_seed, train_seed, Some(summary)), outcome))
}

/// Metrics of one base model on `samples`.
pub fn evaluate_base(model: &BaseModel, samples: &[PatchSample], tta: Option<&TtaConfig>) -> Result<MetricsReport> {
    let logits = base_logits(model, samples, tta)?;
    metrics_from_logits(&logits, &labels(samples))
}

pub fn base_logits(model: &BaseModel, samples: &[PatchSample], tta: Option<&TtaConfig>) -> Result<Tensor> {
    let identity = TtaConfig::identity_only();
    let patches: Vec<Patch> = samples.iter().map(|s| s.patch.clone()).collect();
    crate::ensemble::tta_logits(model, &patches, tta.unwrap_or(&identity))
}

/// Metrics of a fusion head on precomputed base logits.
pub fn evaluate_head(head_ck: &Checkpoint, logits: &LogitSet) -> Result<MetricsReport> {
    let head = head_ck.as_head()?;
    if head.models != logits.models {
        return Err(Error::Config(format!(
            "head expects models {:?} but logits list {:?}",
            head.models, logits.models
        )));
    }
    let stacked = StackedLogits::from_logit_set(logits)?;
    let fused = fuse(&stacked, head, &mut ForwardCtx::eval())?;
    metrics_from_logits(&fused, &logits.labels())
}

/// Metrics of each model column of a logit set, used as standalone classifiers.
pub fn evaluate_columns(logits: &LogitSet) -> Result<IndexMap<String, MetricsReport>> {
    let stacked = StackedLogits {
        models: logits.models.clone(),
        tensor: Tensor::new(
            vec![logits.len(), logits.models.len(), logits.classes],
            logits
                .records
                .iter()
                .flat_map(|r| logits.models.iter().flat_map(move |m| r.logits[m].clone()))
                .collect(),
        )?,
    };
    let y = logits.labels();
    logits
        .models
        .iter()
        .enumerate()
        .map(|(i, name)| Ok((name.clone(), metrics_from_logits(&stacked.model_logits(i), &y)?)))
        .collect()
}

/// One line of a paired-results file: accuracy per model for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRecord {
    pub seed_index: u64,
    pub accuracy: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub mean_difference: f64,
    /// `None` when every paired difference is zero.
    pub test: Option<WilcoxonResult>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub reference: String,
    pub runs: usize,
    pub bonferroni: BonferroniResult,
    pub comparisons: Vec<Comparison>,
}

/// Wilcoxon test of `reference` against every other column, judged at the
/// Bonferroni threshold `alpha / k` (`k` defaults to the number of comparisons).
pub fn significance(
    records: &[PairedRecord],
    reference: &str,
    alpha: f64,
    k: Option<usize>,
    allow_undefined: bool,
) -> Result<SignificanceReport> {
    if records.len() < 2 {
        return Err(Error::Config(format!("need at least 2 paired runs, got {}", records.len())));
    }
    let columns: Vec<String> = records[0].accuracy.keys().cloned().collect();
    if !columns.iter().any(|c| c == reference) {
        return Err(Error::Config(format!("reference column '{reference}' not found in {columns:?}")));
    }
    for (i, r) in records.iter().enumerate() {
        if r.accuracy.len() != columns.len() || columns.iter().any(|c| !r.accuracy.contains_key(c)) {
            return Err(Error::Format {
                line: i + 1,
                reason: format!("run {} is not paired with columns {columns:?}", r.seed_index),
            });
        }
    }
    let baselines: Vec<&String> = columns.iter().filter(|c| *c != reference).collect();
    if baselines.is_empty() {
        return Err(Error::Config("no baseline columns to compare against".into()));
    }
    let k = k.unwrap_or(baselines.len());
    if k == 0 {
        return Err(Error::Config("Bonferroni family size must be at least 1".into()));
    }
    let threshold = alpha / k as f64;
    let mut comparisons = Vec::new();
    let mut p_values = Vec::new();
    for b in baselines {
        let diffs: Vec<f64> = records.iter().map(|r| r.accuracy[reference] - r.accuracy[b]).collect();
        let test = match wilcoxon_signed_rank(&diffs, threshold) {
            Ok(t) => Some(t),
            Err(Error::Undefined(_)) if allow_undefined => None,
            Err(e) => return Err(e.in_stage(format!("wilcoxon {reference} vs {b}"))),
        };
        p_values.push(test.as_ref().map_or(1.0, |t| t.p_value));
        comparisons.push(Comparison {
            baseline: b.clone(),
            mean_difference: diffs.iter().sum::<f64>() / diffs.len() as f64,
            significant: test.as_ref().is_some_and(|t| t.significant),
            test,
        });
    }
    let mut bonf = bonferroni(&p_values, alpha)?;
    if k != p_values.len() {
        bonf.tests = k;
        bonf.threshold = threshold;
        bonf.significant = p_values.iter().map(|&p| p < threshold).collect();
    }
    Ok(SignificanceReport {
        reference: reference.to_string(),
        runs: records.len(),
        bonferroni: bonf,
        comparisons,
    })
}

impl SignificanceReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Wilcoxon signed-rank, {} paired runs, Bonferroni threshold {:.4} (alpha {} / {})",
            self.runs, self.bonferroni.threshold, self.bonferroni.family_alpha, self.bonferroni.tests
        );
        let _ = writeln!(s, "{:<12} {:<12} {:>8} {:>6} {:>12}  significant", "reference", "baseline", "mean diff", "W", "p");
        for c in &self.comparisons {
            let (w, p) = match &c.test {
                Some(t) => (format!("{}", t.statistic), format!("{:.6}", t.p_value)),
                None => ("-".into(), "undefined".into()),
            };
            let _ = writeln!(
                s,
                "{:<12} {:<12} {:>+8.4} {:>6} {:>12}  {}",
                self.reference,
                c.baseline,
                c.mean_difference,
                w,
                p,
                if c.significant { "yes" } else { "no" }
            );
        }
        s
    }
}

pub fn read_paired(path: &Path) -> Result<Vec<PairedRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
