//! Line-delimited JSON dataset and logit files.

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{DatasetSplit, PatchSample};
use crate::error::{Error, Result};

/// Per-sample logits from each base model, in model order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitRecord {
    pub id: String,
    pub label: u8,
    pub logits: IndexMap<String, Vec<f64>>,
}

/// Validated collection of logit records sharing one model set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogitSet {
    pub models: Vec<String>,
    pub classes: usize,
    pub records: Vec<LogitRecord>,
}

impl LogitSet {
    /// Checks that every record lists exactly `models` with `classes` logits each.
    pub fn from_records(records: Vec<LogitRecord>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Ok(LogitSet::default());
        };
        let models: Vec<String> = first.logits.keys().cloned().collect();
        let classes = first.logits.values().next().map_or(0, Vec::len);
        for (i, rec) in records.iter().enumerate() {
            check_record(rec, &models, classes, i + 1)?;
        }
        Ok(LogitSet {
            models,
            classes,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label as usize).collect()
    }
}

fn check_record(rec: &LogitRecord, models: &[String], classes: usize, line: usize) -> Result<()> {
    if rec.label > 1 {
        return Err(Error::Format {
            line,
            reason: format!("label must be 0 or 1, got {}", rec.label),
        });
    }
    for m in models {
        match rec.logits.get(m) {
            None => {
                return Err(Error::Format {
                    line,
                    reason: format!("record '{}' is missing model '{m}'", rec.id),
                })
            }
            Some(v) if v.len() != classes || classes == 0 => {
                return Err(Error::Format {
                    line,
                    reason: format!("model '{m}' has {} logits, expected {classes}", v.len()),
                })
            }
            Some(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(Error::Format {
                    line,
                    reason: format!("model '{m}' has non-finite logits"),
                })
            }
            Some(_) => {}
        }
    }
    if rec.logits.len() != models.len() {
        let extra: Vec<_> = rec.logits.keys().filter(|k| !models.contains(k)).collect();
        return Err(Error::Format {
            line,
            reason: format!("record '{}' has unexpected models {extra:?}", rec.id),
        });
    }
    Ok(())
}

fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
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

/// Writes `text` to a sibling temporary file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn to_lines<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<PatchSample>> {
    read_records(path.as_ref())
}

pub fn write_dataset(path: impl AsRef<Path>, samples: &[PatchSample]) -> Result<()> {
    write_atomic(path.as_ref(), &to_lines(samples))
}

pub fn read_logits(path: impl AsRef<Path>) -> Result<LogitSet> {
    LogitSet::from_records(read_records(path.as_ref())?)
}

pub fn write_logits(path: impl AsRef<Path>, set: &LogitSet) -> Result<()> {
    write_atomic(path.as_ref(), &to_lines(&set.records))
}

impl DatasetSplit {
    /// Writes `train.jsonl`, `val.jsonl` and `test.jsonl` under `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_dataset(dir.join("train.jsonl"), &self.train)?;
        write_dataset(dir.join("val.jsonl"), &self.val)?;
        write_dataset(dir.join("test.jsonl"), &self.test)
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(DatasetSplit {
            train: read_dataset(dir.join("train.jsonl"))?,
            val: read_dataset(dir.join("val.jsonl"))?,
            test: read_dataset(dir.join("test.jsonl"))?,
        })
    }
}
