//! Logit-level toy task where each base model is reliable on its own region.

use serde::{Deserialize, Serialize};

use super::{LogitRecord, LogitSet};
use crate::autodiff::{derive_seed, RngState};
use crate::error::{Error, Result};

/// Every sample belongs to one of `models` regions. The model owning the
/// region emits a confident, correct margin; every other model emits a weak
/// margin toward a random class. A selector that trusts the confident model
/// recovers nearly every label while each base is right on only its own
/// region plus chance elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplementaryConfig {
    /// Samples in train, val and test.
    pub sizes: [usize; 3],
    pub models: usize,
    pub malignant_share: f64,
    /// Range of the expert's correct margin.
    pub expert_margin: (f64, f64),
    /// Range of the other models' random-direction margin.
    pub guess_margin: (f64, f64),
    pub seed: u64,
}

impl Default for ComplementaryConfig {
    fn default() -> Self {
        ComplementaryConfig {
            sizes: [3000, 1000, 1000],
            models: 3,
            malignant_share: 0.5,
            expert_margin: (1.5, 3.0),
            guess_margin: (0.1, 0.8),
            seed: 0,
        }
    }
}

fn split(name: &str, n: usize, cfg: &ComplementaryConfig) -> Result<LogitSet> {
    let mut rng = RngState::new(derive_seed(cfg.seed, name, 0));
    let names: Vec<String> = (0..cfg.models).map(|m| format!("model{m}")).collect();
    let records = (0..n)
        .map(|i| {
            let label = u8::from(rng.bernoulli(cfg.malignant_share));
            let region = rng.below(cfg.models);
            let logits = names
                .iter()
                .enumerate()
                .map(|(m, name)| {
                    let (toward, margin) = if m == region {
                        (label, rng.uniform_range(cfg.expert_margin.0, cfg.expert_margin.1))
                    } else {
                        (u8::from(rng.bernoulli(0.5)), rng.uniform_range(cfg.guess_margin.0, cfg.guess_margin.1))
                    };
                    let z = if toward == 1 { margin / 2.0 } else { -margin / 2.0 };
                    (name.clone(), vec![-z, z])
                })
                .collect();
            LogitRecord {
                id: format!("{name}-{i:05}"),
                label,
                logits,
            }
        })
        .collect();
    LogitSet::from_records(records)
}

/// `[train, val, test]` logit sets for the complementary task.
pub fn complementary_logits(cfg: &ComplementaryConfig) -> Result<[LogitSet; 3]> {
    if cfg.models < 2 || cfg.sizes.contains(&0) {
        return Err(Error::Config("complementary task needs >= 2 models and non-empty splits".into()));
    }
    if !(0.0 < cfg.malignant_share && cfg.malignant_share < 1.0) {
        return Err(Error::Config(format!("malignant share must lie in (0, 1), got {}", cfg.malignant_share)));
    }
    Ok([
        split("train", cfg.sizes[0], cfg)?,
        split("val", cfg.sizes[1], cfg)?,
        split("test", cfg.sizes[2], cfg)?,
    ])
}
