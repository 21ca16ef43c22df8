//! Inverse-frequency class weights, weighted cross-entropy and focal loss.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Per-class weights `w_k = (1/n_k) / Σ_j (1/n_j) · C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub counts: Vec<u64>,
    pub weights: Vec<f64>,
}

impl ClassWeights {
    pub fn uniform(classes: usize) -> Self {
        ClassWeights {
            counts: vec![1; classes],
            weights: vec![1.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }
}

pub fn compute_class_weights(counts: &[u64]) -> Result<ClassWeights> {
    if counts.is_empty() {
        return Err(Error::Config("class counts are empty".into()));
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Config(format!("class {k} has zero samples; inverse-frequency weight undefined")));
    }
    let inv: Vec<f64> = counts.iter().map(|&n| 1.0 / n as f64).collect();
    let total: f64 = inv.iter().sum();
    let c = counts.len() as f64;
    Ok(ClassWeights {
        counts: counts.to_vec(),
        weights: inv.iter().map(|w| w / total * c).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub gamma: f64,
    pub alpha: Vec<f64>,
}

impl Default for FocalConfig {
    fn default() -> Self {
        FocalConfig {
            gamma: 2.0,
            alpha: vec![0.33, 1.67],
        }
    }
}

impl FocalConfig {
    pub fn new(gamma: f64, alpha: Vec<f64>) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("focal gamma must be >= 0, got {gamma}")));
        }
        if alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("focal alpha must be positive, got {alpha:?}")));
        }
        Ok(FocalConfig { gamma, alpha })
    }

    pub fn from_weights(gamma: f64, weights: &ClassWeights) -> Result<Self> {
        FocalConfig::new(gamma, weights.weights.clone())
    }
}

/// One-hot rows for integer labels.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Config(format!("label {y} out of range for {classes} classes")));
        }
        data[i * classes + y] = 1.0;
    }
    Tensor::new(vec![labels.len(), classes], data)
}

/// Single-sample focal term `−α (1 − p)^γ ln p`.
pub fn focal_term(p_t: f64, alpha_t: f64, gamma: f64) -> f64 {
    -alpha_t * (1.0 - p_t).powf(gamma) * p_t.ln()
}

fn check_inputs(tape: &Tape, logits: Var, targets: &Tensor, weights: &[f64]) -> Result<(usize, usize)> {
    let shape = tape.shape(logits);
    let [b, c] = *shape else {
        return Err(Error::dim("loss", shape, &[0, 0]));
    };
    if targets.shape() != shape {
        return Err(Error::dim("loss", shape, targets.shape()));
    }
    if weights.len() != c {
        return Err(Error::dim("loss", shape, &[weights.len()]));
    }
    if !tape.value(logits).is_finite() {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    for i in 0..b {
        let row = targets.row(i);
        let s: f64 = row.iter().sum();
        if row.iter().any(|&y| y < 0.0) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("target row {i} is not a probability vector: {row:?}")));
        }
    }
    Ok((b, c))
}

fn weighted_targets(targets: &Tensor, weights: &[f64]) -> Tensor {
    let c = weights.len();
    let data = targets
        .data()
        .iter()
        .enumerate()
        .map(|(i, y)| y * weights[i % c])
        .collect();
    Tensor::new(targets.shape().to_vec(), data).expect("same shape")
}

/// Batch mean of `−Σ_k y_k α_k (1 − p_k)^γ log p_k` with `p = softmax(logits)`.
///
/// `targets` holds one probability row per sample; hard labels are one-hot rows.
pub fn focal_loss(tape: &mut Tape, logits: Var, targets: &Tensor, cfg: &FocalConfig) -> Result<Var> {
    let (b, _) = check_inputs(tape, logits, targets, &cfg.alpha)?;
    let log_p = tape.log_softmax(logits);
    let p = tape.exp(log_p);
    let one_minus = tape.affine(p, -1.0, 1.0);
    // exp(log_softmax) can exceed 1 by an ulp
    let one_minus = if tape.value(one_minus).data().iter().any(|&v| v < 0.0) {
        tape.relu(one_minus)
    } else {
        one_minus
    };
    let modulation = tape.pow(one_minus, cfg.gamma)?;
    let w = tape.constant(weighted_targets(targets, &cfg.alpha));
    let per_class = tape.mul(modulation, log_p)?;
    let per_class = tape.mul(per_class, w)?;
    let total = tape.sum(per_class);
    Ok(tape.scale(total, -1.0 / b as f64))
}

/// Batch mean of `−Σ_k y_k w_k log p_k`.
pub fn weighted_cross_entropy(tape: &mut Tape, logits: Var, targets: &Tensor, weights: &[f64]) -> Result<Var> {
    let (b, _) = check_inputs(tape, logits, targets, weights)?;
    let log_p = tape.log_softmax(logits);
    let w = tape.constant(weighted_targets(targets, weights));
    let per_class = tape.mul(log_p, w)?;
    let total = tape.sum(per_class);
    Ok(tape.scale(total, -1.0 / b as f64))
}
