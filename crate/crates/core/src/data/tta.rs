use serde::{Deserialize, Serialize};

use super::transforms::{adjust_brightness, adjust_contrast, flip_horizontal, flip_vertical, rotate90};
use super::Patch;
use crate::error::{Error, Result};

/// A deterministic test-time transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TtaTransform {
    Identity,
    HFlip,
    VFlip,
    Rot90,
    Rot180,
    Rot270,
    Brightness(f64),
    Contrast(f64),
}

impl TtaTransform {
    pub fn is_rotation(self) -> bool {
        matches!(self, TtaTransform::Rot90 | TtaTransform::Rot180 | TtaTransform::Rot270)
    }

    pub fn apply(self, p: &Patch) -> Patch {
        match self {
            TtaTransform::Identity => p.clone(),
            TtaTransform::HFlip => flip_horizontal(p),
            TtaTransform::VFlip => flip_vertical(p),
            TtaTransform::Rot90 => rotate90(p, 1),
            TtaTransform::Rot180 => rotate90(p, 2),
            TtaTransform::Rot270 => rotate90(p, 3),
            TtaTransform::Brightness(f) => adjust_brightness(p, f),
            TtaTransform::Contrast(f) => adjust_contrast(p, f),
        }
    }
}

/// Transforms applied in addition to the untouched input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaConfig {
    pub transforms: Vec<TtaTransform>,
}

impl Default for TtaConfig {
    fn default() -> Self {
        use TtaTransform::*;
        TtaConfig {
            transforms: vec![
                HFlip,
                VFlip,
                Rot90,
                Rot180,
                Rot270,
                Brightness(1.1),
                Brightness(0.9),
                Contrast(1.1),
            ],
        }
    }
}

impl TtaConfig {
    /// Only the original input.
    pub fn identity_only() -> Self {
        TtaConfig { transforms: Vec::new() }
    }

    /// Number of views per input, `N + 1`.
    pub fn views(&self) -> usize {
        self.transforms.len() + 1
    }
}

/// The original patch followed by each configured transform, in order.
pub fn tta_expand(patch: &Patch, cfg: &TtaConfig) -> Result<Vec<Patch>> {
    if !patch.is_square() && cfg.transforms.iter().any(|t| t.is_rotation()) {
        return Err(Error::Config(format!(
            "rotations need a square patch, got {}x{}",
            patch.height, patch.width
        )));
    }
    let mut out = Vec::with_capacity(cfg.views());
    out.push(patch.clone());
    out.extend(cfg.transforms.iter().map(|t| t.apply(patch)));
    Ok(out)
}
