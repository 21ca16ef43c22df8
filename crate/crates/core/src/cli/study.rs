//! Multi-seed experiment: bases, fusion head, TTA evaluation and significance.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::commands::{export_logits, gen_data, significance, train_base, train_head, PairedRecord, SignificanceReport};
use super::RunConfig;
use crate::autodiff::derive_seed;
use crate::data::io::{to_lines, write_atomic};
use crate::data::DatasetSplit;
use crate::ensemble::{fuse, StackedLogits};
use crate::error::{Error, Result};
use crate::eval::{mean_std, metrics_from_logits};
use crate::layers::ForwardCtx;

/// Column name of the fused model in study outputs.
pub const ENSEMBLE_NAME: &str = "mase";

/// Test-set outcome of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed_index: u64,
    pub samples: u64,
    /// Ensemble first, then bases in trunk order.
    pub accuracy: IndexMap<String, f64>,
    pub correct: IndexMap<String, u64>,
    pub auc: IndexMap<String, Option<f64>>,
    pub best_epoch: IndexMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub seeds: u64,
    pub master_seed: u64,
    pub models: Vec<ModelSummary>,
    pub significance: Option<SignificanceReport>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub records: Vec<SeedRecord>,
    pub summary: StudySummary,
}

/// Seeds for `stage` of run `index`, derived from the master seed.
pub fn stage_seed(master: u64, stage: &str, index: u64) -> u64 {
    derive_seed(master, stage, index)
}

/// Runs bases → head → TTA evaluation for one seed on a fixed dataset.
pub fn run_seed(cfg: &RunConfig, split: &DatasetSplit, index: u64) -> Result<SeedRecord> {
    let tta = cfg.use_tta.then_some(&cfg.tta);
    let mut bases = Vec::new();
    let mut best_epoch = IndexMap::new();
    for &preset in &cfg.study.trunks {
        let stage = format!("train-base {preset} (seed {index})");
        let init = stage_seed(cfg.seed, &format!("init-{preset}"), index);
        let train = stage_seed(cfg.seed, &format!("train-{preset}"), index);
        let trained = train_base(preset, split, cfg, init, train).map_err(|e| e.in_stage(&stage))?;
        best_epoch.insert(preset.to_string(), trained.outcome.best_epoch);
        bases.push((preset.to_string(), trained.checkpoint.as_base()?.clone()));
    }

    let stage = format!("export-logits (seed {index})");
    let [train_l, val_l, test_l] = [&split.train, &split.val, &split.test]
        .map(|s| export_logits(&bases, s, tta).map_err(|e| e.in_stage(&stage)));
    let (train_l, val_l, test_l) = (train_l?, val_l?, test_l?);

    let stage = format!("train-ensemble (seed {index})");
    let (head_ck, outcome) = train_head(
        &train_l,
        &val_l,
        cfg,
        stage_seed(cfg.seed, "init-head", index),
        stage_seed(cfg.seed, "train-head", index),
    )
    .map_err(|e| e.in_stage(&stage))?;
    best_epoch.shift_insert(0, ENSEMBLE_NAME.to_string(), outcome.best_epoch);

    let stage = format!("evaluate (seed {index})");
    let stacked = StackedLogits::from_logit_set(&test_l).map_err(|e| e.in_stage(&stage))?;
    let y = test_l.labels();
    let fused = fuse(&stacked, head_ck.as_head()?, &mut ForwardCtx::eval()).map_err(|e| e.in_stage(&stage))?;
    let mut reports = vec![(ENSEMBLE_NAME.to_string(), metrics_from_logits(&fused, &y)?)];
    for (i, name) in stacked.models.iter().enumerate() {
        reports.push((name.clone(), metrics_from_logits(&stacked.model_logits(i), &y)?));
    }
    Ok(SeedRecord {
        seed_index: index,
        samples: y.len() as u64,
        accuracy: reports.iter().map(|(n, r)| (n.clone(), r.accuracy)).collect(),
        correct: reports.iter().map(|(n, r)| (n.clone(), r.confusion.correct())).collect(),
        auc: reports.iter().map(|(n, r)| (n.clone(), r.auc)).collect(),
        best_epoch,
    })
}

/// Mean ± std per model and, with two or more seeds, the ensemble-vs-base tests.
pub fn summarize(cfg: &RunConfig, records: &[SeedRecord]) -> Result<StudySummary> {
    let Some(first) = records.first() else {
        return Err(Error::Config("no study records to summarize".into()));
    };
    let models = first
        .accuracy
        .keys()
        .map(|m| {
            let acc: Vec<f64> = records.iter().map(|r| r.accuracy[m]).collect();
            let aucs: Option<Vec<f64>> = records.iter().map(|r| r.auc[m]).collect();
            let (accuracy_mean, accuracy_std) = mean_std(&acc);
            let auc = aucs.map(|a| mean_std(&a));
            ModelSummary {
                model: m.clone(),
                accuracy_mean,
                accuracy_std,
                auc_mean: auc.map(|a| a.0),
                auc_std: auc.map(|a| a.1),
            }
        })
        .collect();
    let significance = if records.len() >= 2 {
        // Differences from integer counts keep tied runs exactly tied.
        let paired: Vec<PairedRecord> = records
            .iter()
            .map(|r| PairedRecord {
                seed_index: r.seed_index,
                accuracy: r
                    .correct
                    .iter()
                    .map(|(m, &c)| (m.clone(), c as f64 / r.samples as f64))
                    .collect(),
            })
            .collect();
        Some(significance(&paired, ENSEMBLE_NAME, cfg.study.family_alpha, None, true)?)
    } else {
        None
    };
    Ok(StudySummary {
        seeds: records.len() as u64,
        master_seed: cfg.seed,
        models,
        significance,
        config: cfg.clone(),
    })
}

/// Runs every seed (up to `cfg.study.workers` at once), writing per-seed
/// records, `results.jsonl`, `summary.json` and `summary.txt` under `out`.
pub fn run_study(cfg: &RunConfig, out: Option<&Path>) -> Result<StudyOutcome> {
    cfg.validate()?;
    let split = gen_data(cfg, out.map(|o| o.join("data")).as_deref()).map_err(|e| e.in_stage("gen-data"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.study.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<SeedRecord> = pool.install(|| {
        (0..cfg.study.seeds)
            .into_par_iter()
            .map(|i| {
                let rec = run_seed(cfg, &split, i)?;
                if let Some(dir) = out {
                    let path = dir.join("seeds").join(format!("seed-{i:03}.json"));
                    write_atomic(&path, &serde_json::to_string(&rec).expect("record serializes"))?;
                }
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = summarize(cfg, &records)?;
    if let Some(dir) = out {
        write_atomic(&dir.join("results.jsonl"), &to_lines(&records))?;
        write_atomic(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
        write_atomic(&dir.join("summary.txt"), &summary.table())?;
    }
    Ok(StudyOutcome { records, summary })
}

impl StudySummary {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} seeds, master seed {}", self.seeds, self.master_seed);
        let _ = writeln!(s, "{:<10} {:>20} {:>20}", "model", "accuracy (%)", "auc");
        for m in &self.models {
            let auc = match (m.auc_mean, m.auc_std) {
                (Some(a), Some(sd)) => format!("{a:.4} (±{sd:.4})"),
                _ => "undefined".into(),
            };
            let acc = format!("{:.2} (±{:.2})", 100.0 * m.accuracy_mean, 100.0 * m.accuracy_std);
            let _ = writeln!(s, "{:<10} {acc:>20} {auc:>20}", m.model);
        }
        if let Some(sig) = &self.significance {
            s.push('\n');
            s.push_str(&sig.table());
        }
        s
    }
}
