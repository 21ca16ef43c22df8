use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest effective sample size that takes the exact branch.
pub const EXACT_LIMIT: usize = 25;

/// Absolute differences closer than this are treated as ties, and smaller
/// differences as zero, so that accuracies computed along different float
/// paths still rank consistently.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    /// Exact up to [`EXACT_LIMIT`] nonzero differences, normal beyond.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n: usize,
    /// Nonzero differences.
    pub n_effective: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W⁺, W⁻)`.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PValueMethod,
    pub alpha: f64,
    pub significant: bool,
}

/// Average ranks of `|d|` over nonzero differences, returned as
/// `(doubled rank, is_positive)` so that tied ranks stay integral.
pub fn signed_ranks(diffs: &[f64]) -> Result<Vec<(u64, bool)>> {
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::Domain {
            op: "wilcoxon",
            reason: format!("non-finite difference {d}"),
        });
    }
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| d.abs() > TIE_TOLERANCE).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out = Vec::with_capacity(nz.len());
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].abs() - nz[i].abs() <= TIE_TOLERANCE {
            j += 1;
        }
        let doubled = (i + j + 2) as u64;
        out.extend(nz[i..=j].iter().map(|d| (doubled, *d > 0.0)));
        i = j + 1;
    }
    Ok(out)
}

/// Null distribution of doubled `W⁺` as counts over all `2ⁿ` sign patterns.
fn exact_counts(ranks: &[u64]) -> Vec<f64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranks: &[u64], doubled_stat: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let counts = exact_counts(ranks);
    let patterns = 2f64.powi(ranks.len() as i32);
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as u64).min(total - s as u64) <= doubled_stat)
        .map(|(_, c)| c)
        .sum();
    (extreme / patterns).min(1.0)
}

fn normal_p(ranks: &[u64], doubled_stat: u64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < ranks.len() {
        let t = ranks[i..].iter().take_while(|&&r| r == ranks[i]).count();
        tie_term += (t * t * t - t) as f64;
        i += t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let w = doubled_stat as f64 / 2.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * std_normal.sf(z)).min(1.0)
}

/// Two-sided signed-rank test of a zero median difference.
pub fn wilcoxon_signed_rank(diffs: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    wilcoxon_with(diffs, alpha, PValueMethod::Auto)
}

pub fn wilcoxon_with(diffs: &[f64], alpha: f64, method: PValueMethod) -> Result<WilcoxonResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let signed = signed_ranks(diffs)?;
    if signed.is_empty() {
        return Err(Error::Undefined("all paired differences are zero".into()));
    }
    let ranks: Vec<u64> = signed.iter().map(|&(r, _)| r).collect();
    let plus: u64 = signed.iter().filter(|s| s.1).map(|s| s.0).sum();
    let minus: u64 = ranks.iter().sum::<u64>() - plus;
    let stat = plus.min(minus);
    let method = match method {
        PValueMethod::Auto if signed.len() <= EXACT_LIMIT => PValueMethod::Exact,
        PValueMethod::Auto => PValueMethod::Normal,
        m => m,
    };
    let p_value = match method {
        PValueMethod::Exact => exact_p(&ranks, stat),
        _ => normal_p(&ranks, stat),
    };
    Ok(WilcoxonResult {
        n: diffs.len(),
        n_effective: signed.len(),
        w_plus: plus as f64 / 2.0,
        w_minus: minus as f64 / 2.0,
        statistic: stat as f64 / 2.0,
        p_value,
        method,
        alpha,
        significant: p_value < alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonferroniResult {
    pub family_alpha: f64,
    pub tests: usize,
    pub threshold: f64,
    pub significant: Vec<bool>,
}

/// Per-test significance at `family_alpha / k`.
pub fn bonferroni(p_values: &[f64], family_alpha: f64) -> Result<BonferroniResult> {
    if p_values.is_empty() {
        return Err(Error::Config("Bonferroni correction needs at least one test".into()));
    }
    let threshold = family_alpha / p_values.len() as f64;
    Ok(BonferroniResult {
        family_alpha,
        tests: p_values.len(),
        threshold,
        significant: p_values.iter().map(|&p| p < threshold).collect(),
    })
}
