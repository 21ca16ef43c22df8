//! Patch datasets, synthetic generation, sampling, augmentation and file formats.

mod augment;
mod complementary;
pub(crate) mod io;
mod mixup;
mod sampler;
mod synthetic;
mod transforms;
mod tta;

pub use augment::{augment_train, random_erase, AugmentConfig, EraseRect};
pub use complementary::{complementary_logits, ComplementaryConfig};
pub use io::{
    read_dataset, read_logits, write_dataset, write_logits, LogitRecord, LogitSet,
};
pub use mixup::{mix_pairs, mixup, MixupConfig, MixupOutcome};
pub use sampler::weighted_sampler;
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use transforms::{adjust_brightness, adjust_contrast, flip_horizontal, flip_vertical, rotate90};
pub use tta::{tta_expand, TtaConfig, TtaTransform};

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const BENIGN: u8 = 0;
pub const MALIGNANT: u8 = 1;

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl Patch {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(Error::dim("patch", &[height, width], &[pixels.len()]));
        }
        Ok(Patch {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Patch {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|p| (0.0..=1.0).contains(p))
    }

    pub(crate) fn clamp(&mut self) {
        self.pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    }
}

/// One labelled patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub id: String,
    pub label: u8,
    pub patch: Patch,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchRecord {
    id: String,
    label: u8,
    patch: Vec<Vec<f64>>,
}

impl Serialize for PatchSample {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PatchRecord {
            id: self.id.clone(),
            label: self.label,
            patch: self.patch.pixels.chunks(self.patch.width).map(<[f64]>::to_vec).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PatchSample {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = PatchRecord::deserialize(d)?;
        if rec.label > 1 {
            return Err(D::Error::custom(format!("label must be 0 or 1, got {}", rec.label)));
        }
        let height = rec.patch.len();
        let width = rec.patch.first().map_or(0, Vec::len);
        if height == 0 || width == 0 || rec.patch.iter().any(|r| r.len() != width) {
            return Err(D::Error::custom("patch must be a non-empty rectangular array"));
        }
        let pixels: Vec<f64> = rec.patch.into_iter().flatten().collect();
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(D::Error::custom("pixel values must lie in [0, 1]"));
        }
        Ok(PatchSample {
            id: rec.id,
            label: rec.label,
            patch: Patch {
                height,
                width,
                pixels,
            },
        })
    }
}

/// Per-class sample counts `[benign, malignant]`.
pub fn class_counts(samples: &[PatchSample]) -> [u64; 2] {
    let mut counts = [0u64; 2];
    for s in samples {
        counts[s.label as usize] += 1;
    }
    counts
}

pub fn labels(samples: &[PatchSample]) -> Vec<usize> {
    samples.iter().map(|s| s.label as usize).collect()
}

/// Stacks flattened patches into a `[N × H·W]` matrix.
pub fn patch_matrix(samples: &[PatchSample]) -> Result<Tensor> {
    let Some(first) = samples.first() else {
        return Err(Error::Config("no samples".into()));
    };
    let (h, w) = (first.patch.height, first.patch.width);
    let mut data = Vec::with_capacity(samples.len() * h * w);
    for s in samples {
        if s.patch.height != h || s.patch.width != w {
            return Err(Error::dim("patch_matrix", &[h, w], &[s.patch.height, s.patch.width]));
        }
        data.extend_from_slice(&s.patch.pixels);
    }
    Tensor::new(vec![samples.len(), h * w], data)
}

/// Train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<PatchSample>,
    pub val: Vec<PatchSample>,
    pub test: Vec<PatchSample>,
}

impl DatasetSplit {
    pub fn counts(&self) -> [[u64; 2]; 3] {
        [class_counts(&self.train), class_counts(&self.val), class_counts(&self.test)]
    }

    pub fn patch_shape(&self) -> Option<(usize, usize)> {
        self.train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .next()
            .map(|s| (s.patch.height, s.patch.width))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patch_sample_json_shape() {
        let s = PatchSample {
            id: "a".into(),
            label: 1,
            patch: Patch::new(2, 3, vec![0.0, 0.1, 0.2, 0.3, 0.4, 1.0]).unwrap(),
        };
        let line = serde_json::to_string(&s).unwrap();
        assert_eq!(line, r#"{"id":"a","label":1,"patch":[[0.0,0.1,0.2],[0.3,0.4,1.0]]}"#);
        let back: PatchSample = serde_json::from_str(&line).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_records() {
        for bad in [
            r#"{"id":"a","label":2,"patch":[[0.5]]}"#,
            r#"{"id":"a","label":0,"patch":[[0.5],[0.1,0.2]]}"#,
            r#"{"id":"a","label":0,"patch":[[1.5]]}"#,
            r#"{"id":"a","label":0,"patch":[]}"#,
        ] {
            assert!(serde_json::from_str::<PatchSample>(bad).is_err(), "{bad}");
        }
    }
}
