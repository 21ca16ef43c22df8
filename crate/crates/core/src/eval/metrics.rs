use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Decision threshold on the malignant-class probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Row-wise argmax; ties resolve to the lowest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let c = logits.last_dim().max(1);
    logits
        .data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Softmax probability of class 1 for each row of a `[N × 2]` logit matrix.
pub fn positive_probabilities(logits: &Tensor) -> Result<Vec<f64>> {
    if logits.shape().len() != 2 || logits.last_dim() != 2 {
        return Err(Error::dim("positive_probabilities", logits.shape(), &[logits.rows(), 2]));
    }
    Ok(logits
        .data()
        .chunks(2)
        .map(|r| {
            let d = r[1] - r[0];
            if d >= 0.0 {
                1.0 / (1.0 + (-d).exp())
            } else {
                let e = d.exp();
                e / (1.0 + e)
            }
        })
        .collect())
}

/// Binary confusion counts with malignant (label 1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }
}

pub fn confusion(predicted: &[usize], truth: &[usize]) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::dim("confusion", &[predicted.len()], &[truth.len()]));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => m.tp += 1,
            (1, 0) => m.fp += 1,
            (0, 0) => m.tn += 1,
            (0, 1) => m.fn_ += 1,
            _ => {
                return Err(Error::Domain {
                    op: "confusion",
                    reason: format!("labels must be 0 or 1, got prediction {p} and truth {t}"),
                })
            }
        }
    }
    Ok(m)
}

/// Precision, recall and F1 for one class. Zero denominators yield 0 and set
/// the matching `*_undefined` flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl ClassMetrics {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
        let (precision, precision_undefined) = ratio(tp, tp + fp);
        let (recall, recall_undefined) = ratio(tp, tp + fn_);
        let (f1, f1_undefined) = if precision + recall == 0.0 {
            (0.0, true)
        } else {
            (2.0 * precision * recall / (precision + recall), false)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: tp + fn_,
            precision_undefined,
            recall_undefined,
            f1_undefined,
        }
    }
}

mod auc_marker {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("undefined"),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Value(f64),
        Marker(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Value(x) => Ok(Some(x)),
            Raw::Marker(m) if m == "undefined" => Ok(None),
            Raw::Marker(m) => Err(serde::de::Error::custom(format!("unexpected AUC marker '{m}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: u64,
    pub accuracy: f64,
    pub benign: ClassMetrics,
    pub malignant: ClassMetrics,
    pub weighted_f1: f64,
    /// `None` when only one class is present; serialized as `"undefined"`.
    #[serde(with = "auc_marker")]
    pub auc: Option<f64>,
    pub confusion: ConfusionMatrix,
    /// Malignant recall.
    pub sensitivity: f64,
    /// Benign recall.
    pub specificity: f64,
    pub threshold: f64,
    /// Scores sitting exactly on the threshold, resolved to benign.
    pub threshold_ties: u64,
}

/// Metrics from malignant-class probabilities. A sample is predicted
/// malignant when its score is strictly above `threshold`.
pub fn metrics(scores: &[f64], labels: &[usize], threshold: f64) -> Result<MetricsReport> {
    if scores.is_empty() {
        return Err(Error::Config("cannot compute metrics of an empty set".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Domain {
            op: "metrics",
            reason: format!("scores must lie in [0, 1], got {s}"),
        });
    }
    let preds: Vec<usize> = scores.iter().map(|&s| usize::from(s > threshold)).collect();
    report(scores, &preds, labels, threshold)
}

fn report(scores: &[f64], preds: &[usize], labels: &[usize], threshold: f64) -> Result<MetricsReport> {
    let cm = confusion(preds, labels)?;
    let malignant = ClassMetrics::from_counts(cm.tp, cm.fp, cm.fn_);
    let benign = ClassMetrics::from_counts(cm.tn, cm.fn_, cm.fp);
    let n = cm.total() as f64;
    let weighted_f1 = (benign.support as f64 * benign.f1 + malignant.support as f64 * malignant.f1) / n;
    Ok(MetricsReport {
        samples: cm.total(),
        accuracy: cm.accuracy(),
        benign,
        malignant,
        weighted_f1,
        auc: auc(scores, labels).ok(),
        confusion: cm,
        sensitivity: malignant.recall,
        specificity: benign.recall,
        threshold,
        threshold_ties: scores.iter().filter(|&&s| s == threshold).count() as u64,
    })
}

/// Metrics for `[N × 2]` logits. Predictions are the row argmax, which agrees
/// with thresholding the softmax at 0.5 but cannot be flipped by rounding.
pub fn metrics_from_logits(logits: &Tensor, labels: &[usize]) -> Result<MetricsReport> {
    let scores = positive_probabilities(logits)?;
    if scores.is_empty() {
        return Err(Error::Config("cannot compute metrics of an empty set".into()));
    }
    let mut r = report(&scores, &argmax_rows(logits), labels, DEFAULT_THRESHOLD)?;
    r.threshold_ties = logits.data().chunks(2).filter(|row| row[0] == row[1]).count() as u64;
    Ok(r)
}

fn class_split(scores: &[f64], labels: &[usize]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::dim("auc", &[scores.len()], &[labels.len()]));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain {
            op: "auc",
            reason: "scores contain NaN".into(),
        });
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUC needs both classes present".into()));
    }
    Ok((pos, neg))
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, via the Mann-Whitney rank statistic.
pub fn auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    let (pos, neg) = class_split(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the positive rank sum, so tied average ranks stay integral.
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share the average (i+j+2)/2
        let doubled_avg = (i + j + 2) as u64;
        let positives = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        doubled_rank_sum += doubled_avg * positives;
        i = j + 1;
    }
    let doubled_u = doubled_rank_sum - pos * (pos + 1);
    Ok(doubled_u as f64 / (2 * pos * neg) as f64)
}

/// ROC operating points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[usize]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = class_split(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(k + 1).is_none_or(|&n| scores[n] != scores[i]);
        if last_of_group {
            points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        }
    }
    Ok(points)
}

/// Mean and sample standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl MetricsReport {
    /// Human-readable table.
    pub fn table(&self) -> String {
        let auc = self.auc.map_or("undefined".to_string(), |a| format!("{a:.4}"));
        let flag = |m: &ClassMetrics| {
            if m.precision_undefined || m.recall_undefined {
                " (zero denominator, reported as 0)"
            } else {
                ""
            }
        };
        let mut s = String::new();
        let _ = writeln!(s, "samples        {}", self.samples);
        let _ = writeln!(s, "accuracy       {:.4}", self.accuracy);
        let _ = writeln!(s, "auc            {auc}");
        let _ = writeln!(s, "weighted f1    {:.4}", self.weighted_f1);
        let _ = writeln!(s, "class      precision  recall   f1       support");
        for (name, m) in [("benign", &self.benign), ("malignant", &self.malignant)] {
            let _ = writeln!(
                s,
                "{name:<10} {:<10.4} {:<8.4} {:<8.4} {}{}",
                m.precision,
                m.recall,
                m.f1,
                m.support,
                flag(m)
            );
        }
        let c = &self.confusion;
        let _ = writeln!(s, "confusion      TP={} FP={} TN={} FN={}", c.tp, c.fp, c.tn, c.fn_);
        let _ = writeln!(s, "sensitivity    {:.4}", self.sensitivity);
        let _ = write!(s, "specificity    {:.4}", self.specificity);
        s
    }

    /// Single-line JSON record.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
