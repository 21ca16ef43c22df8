//! Class-conditional synthetic nodule patches.
//!
//! Every patch is a noisy background plus a Gaussian blob at a jittered
//! centre. Malignant patches differ from benign ones, in proportion to the
//! separation `δ`, through a larger blob radius, a stronger concentric ring
//! texture and a steeper radial intensity gradient. All three cues are
//! nonlinear in the pixels and blurred by per-patch amplitude and position
//! jitter; at `δ = 0` both classes share one distribution.

use serde::{Deserialize, Serialize};

use super::{DatasetSplit, Patch, PatchSample};
use crate::autodiff::{derive_seed, RngState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// `[benign, malignant]` counts per split.
    pub train: [u64; 2],
    pub val: [u64; 2],
    pub test: [u64; 2],
    pub height: usize,
    pub width: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            train: [4342, 845],
            val: [1073, 224],
            test: [1340, 282],
            height: 12,
            width: 12,
            separation: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Re-splits each split's total as `benign : malignant = ratio.0 : ratio.1`.
    pub fn with_ratio(mut self, ratio: (f64, f64)) -> Result<Self> {
        let (b, m) = ratio;
        if !(b > 0.0 && m > 0.0) {
            return Err(Error::Config(format!("class ratio parts must be positive, got {b}:{m}")));
        }
        for split in [&mut self.train, &mut self.val, &mut self.test] {
            let total = split[0] + split[1];
            let benign = (total as f64 * b / (b + m)).round() as u64;
            *split = [benign, total - benign];
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, split) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if split.iter().any(|&n| n == 0) {
                return Err(Error::Config(format!("{name} split needs at least one sample per class, got {split:?}")));
            }
        }
        if self.height < 2 || self.width < 2 {
            return Err(Error::Config(format!("patch must be at least 2x2, got {}x{}", self.height, self.width)));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Config(format!("separation must be >= 0, got {}", self.separation)));
        }
        Ok(())
    }
}

fn synth_patch(label: u8, cfg: &SyntheticConfig, rng: &mut RngState) -> Patch {
    let (h, w) = (cfg.height, cfg.width);
    let y = f64::from(label) * cfg.separation;
    let scale = h.min(w) as f64 / 12.0;

    let cy = (h as f64 - 1.0) / 2.0 + rng.uniform_range(-1.5, 1.5) * scale;
    let cx = (w as f64 - 1.0) / 2.0 + rng.uniform_range(-1.5, 1.5) * scale;
    let radius = (2.0 + 0.9 * y + rng.normal(0.0, 0.5)).max(0.8) * scale;
    let amplitude = rng.normal(0.45, 0.1);
    let background = rng.normal(0.25, 0.05);
    let ring_amp = 0.04 + 0.08 * y + rng.normal(0.0, 0.03);
    let ring_period = 3.0 * scale;
    let ring_phase = rng.uniform_range(0.0, std::f64::consts::TAU);
    let slope = 0.05 + 0.1 * y + rng.normal(0.0, 0.04);
    let max_d = ((h * h + w * w) as f64).sqrt() / 2.0;

    let mut pixels = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
            let d = d2.sqrt();
            let blob = amplitude * (-d2 / (2.0 * radius * radius)).exp();
            let envelope = (-d2 / (8.0 * radius * radius)).exp();
            let ring = ring_amp * (std::f64::consts::TAU * d / ring_period + ring_phase).cos() * envelope;
            let gradient = slope * (d / max_d);
            let v = background + blob + ring + gradient + rng.normal(0.0, 0.07);
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    Patch {
        height: h,
        width: w,
        pixels,
    }
}

fn generate_split(name: &str, counts: [u64; 2], cfg: &SyntheticConfig) -> Vec<PatchSample> {
    let mut rng = RngState::new(derive_seed(cfg.seed, name, 0));
    let mut labels: Vec<u8> = std::iter::repeat_n(0u8, counts[0] as usize)
        .chain(std::iter::repeat_n(1u8, counts[1] as usize))
        .collect();
    rng.shuffle(&mut labels);
    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| PatchSample {
            id: format!("{name}-{i:05}"),
            label,
            patch: synth_patch(label, cfg, &mut rng),
        })
        .collect()
}

/// Deterministic train/val/test patches for `cfg`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<DatasetSplit> {
    cfg.validate()?;
    Ok(DatasetSplit {
        train: generate_split("train", cfg.train, cfg),
        val: generate_split("val", cfg.val, cfg),
        test: generate_split("test", cfg.test, cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small(seed: u64, separation: f64) -> SyntheticConfig {
        SyntheticConfig {
            train: [200, 40],
            val: [50, 10],
            test: [60, 12],
            separation,
            seed,
            ..SyntheticConfig::default()
        }
    }

    #[test]
    fn default_counts_mirror_published_splits() {
        let cfg = SyntheticConfig::default();
        assert_eq!(cfg.train, [4342, 845]);
        assert_eq!(cfg.val, [1073, 224]);
        assert_eq!(cfg.test, [1340, 282]);
        let total: u64 = [cfg.train, cfg.val, cfg.test].iter().flatten().sum();
        let train = (cfg.train[0] + cfg.train[1]) as f64 / total as f64;
        assert!((train - 0.64).abs() < 0.01);
    }

    #[test]
    fn counts_ids_and_range() {
        let split = generate_synthetic(&small(1, 1.0)).unwrap();
        assert_eq!(split.counts(), [[200, 40], [50, 10], [60, 12]]);
        let ids: HashSet<_> = split.train.iter().chain(&split.val).chain(&split.test).map(|s| &s.id).collect();
        assert_eq!(ids.len(), 240 + 60 + 72);
        for s in split.train.iter().chain(&split.test) {
            assert!(s.patch.in_unit_range());
            assert_eq!((s.patch.height, s.patch.width), (12, 12));
        }
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate_synthetic(&small(5, 1.0)).unwrap(), generate_synthetic(&small(5, 1.0)).unwrap());
        assert_ne!(generate_synthetic(&small(5, 1.0)).unwrap(), generate_synthetic(&small(6, 1.0)).unwrap());
    }

    #[test]
    fn ratio_rebalances_within_split_totals() {
        let cfg = SyntheticConfig::default().with_ratio((1.0, 1.0)).unwrap();
        assert_eq!(cfg.train, [2594, 2593]);
        assert_eq!(cfg.val[0] + cfg.val[1], 1297);
        assert!(cfg.test[0].abs_diff(cfg.test[1]) <= 1);
    }

    #[test]
    fn rejects_empty_class() {
        let cfg = SyntheticConfig {
            val: [10, 0],
            ..small(0, 1.0)
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }
}
