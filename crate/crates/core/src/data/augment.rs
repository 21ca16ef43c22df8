use serde::{Deserialize, Serialize};

use super::transforms::{adjust_brightness, adjust_contrast, flip_horizontal, flip_vertical, rotate90};
use super::Patch;
use crate::autodiff::RngState;

/// Train-time augmentation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub hflip_prob: f64,
    pub vflip_prob: f64,
    /// Rotate by a uniformly chosen multiple of 90° (square patches only).
    pub rotate: bool,
    /// Brightness factor drawn from `1 ± brightness`.
    pub brightness: f64,
    /// Contrast factor drawn from `1 ± contrast`.
    pub contrast: f64,
    pub erase_prob: f64,
    pub erase_area: (f64, f64),
    pub erase_value: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            hflip_prob: 0.5,
            vflip_prob: 0.5,
            rotate: true,
            brightness: 0.2,
            contrast: 0.2,
            erase_prob: 0.2,
            erase_area: (0.02, 0.20),
            erase_value: 0.5,
        }
    }
}

impl AugmentConfig {
    /// Every step disabled.
    pub fn none() -> Self {
        AugmentConfig {
            hflip_prob: 0.0,
            vflip_prob: 0.0,
            rotate: false,
            brightness: 0.0,
            contrast: 0.0,
            erase_prob: 0.0,
            ..AugmentConfig::default()
        }
    }
}

/// Rectangle masked by random erasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EraseRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl EraseRect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }
}

/// Applies each enabled step independently; the result is clamped to `[0, 1]`.
pub fn augment_train(patch: &Patch, cfg: &AugmentConfig, rng: &mut RngState) -> Patch {
    let mut p = patch.clone();
    if cfg.hflip_prob > 0.0 && rng.bernoulli(cfg.hflip_prob) {
        p = flip_horizontal(&p);
    }
    if cfg.vflip_prob > 0.0 && rng.bernoulli(cfg.vflip_prob) {
        p = flip_vertical(&p);
    }
    if cfg.rotate && p.is_square() {
        let k = rng.below(4) as u8;
        if k > 0 {
            p = rotate90(&p, k);
        }
    }
    if cfg.brightness > 0.0 {
        let f = rng.uniform_range(1.0 - cfg.brightness, 1.0 + cfg.brightness);
        p = adjust_brightness(&p, f);
    }
    if cfg.contrast > 0.0 {
        let f = rng.uniform_range(1.0 - cfg.contrast, 1.0 + cfg.contrast);
        p = adjust_contrast(&p, f);
    }
    if cfg.erase_prob > 0.0 && rng.bernoulli(cfg.erase_prob) {
        random_erase(&mut p, cfg.erase_area, cfg.erase_value, rng);
    }
    p.clamp();
    p
}

/// Fills a random rectangle whose area fraction lies in `area`, returning it.
///
/// Tries ten log-uniform aspect ratios first, then picks uniformly among every
/// admissible extent. Returns `None` when no rectangle fits the bounds.
pub fn random_erase(p: &mut Patch, area: (f64, f64), value: f64, rng: &mut RngState) -> Option<EraseRect> {
    let total = (p.height * p.width) as f64;
    let admissible = |h: usize, w: usize| {
        let frac = (h * w) as f64 / total;
        h >= 1 && w >= 1 && h <= p.height && w <= p.width && frac >= area.0 && frac <= area.1
    };

    let mut extent = None;
    for _ in 0..10 {
        let target = rng.uniform_range(area.0, area.1) * total;
        let aspect = rng.uniform_range(0.3f64.ln(), (1.0f64 / 0.3).ln()).exp();
        let h = (target * aspect).sqrt().round() as usize;
        let w = (target / aspect).sqrt().round() as usize;
        if admissible(h, w) {
            extent = Some((h, w));
            break;
        }
    }
    if extent.is_none() {
        let options: Vec<(usize, usize)> = (1..=p.height)
            .flat_map(|h| (1..=p.width).map(move |w| (h, w)))
            .filter(|&(h, w)| admissible(h, w))
            .collect();
        if options.is_empty() {
            return None;
        }
        extent = Some(options[rng.below(options.len())]);
    }
    let (h, w) = extent?;
    let top = rng.below(p.height - h + 1);
    let left = rng.below(p.width - w + 1);
    for r in top..top + h {
        for c in left..left + w {
            p.pixels[r * p.width + c] = value;
        }
    }
    Some(EraseRect {
        top,
        left,
        height: h,
        width: w,
    })
}
