use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, SyntheticConfig, TtaConfig};
use crate::ensemble::default_head_config;
use crate::error::{Error, Result};
use crate::layers::TrunkPreset;
use crate::optim::TrainConfig;

/// Multi-seed experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub seeds: u64,
    /// Seeds run concurrently; results are merged in seed order.
    pub workers: usize,
    pub trunks: Vec<TrunkPreset>,
    pub family_alpha: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seeds: 20,
            workers: 1,
            trunks: TrunkPreset::ALL.to_vec(),
            family_alpha: 0.05,
        }
    }
}

/// Every tunable of every command, with published defaults pre-filled.
///
/// Config files hold overrides only: any omitted key keeps its default. The resolved value is embedded in every checkpoint and result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: SyntheticConfig,
    pub augment: AugmentConfig,
    pub base: TrainConfig,
    pub head: TrainConfig,
    /// Average logits over test-time views when exporting and evaluating.
    pub use_tta: bool,
    pub tta: TtaConfig,
    pub study: StudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data: SyntheticConfig::default(),
            augment: AugmentConfig::default(),
            base: TrainConfig::default(),
            head: default_head_config(),
            use_tta: true,
            tta: TtaConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

impl RunConfig {
    /// A short schedule that keeps the full multi-seed study within minutes
    /// on one CPU core. Separation is raised so the toy bases, which see only
    /// 20 epochs, land clear of the label-noise floor where no fusion can help.
    pub fn desk_scale() -> Self {
        let mut cfg = RunConfig::default();
        cfg.data.separation = 2.2;
        cfg.base.max_epochs = 20;
        cfg.base.patience = 8;
        cfg.head.max_epochs = 20;
        cfg.head.patience = 8;
        cfg
    }

    /// Parses `text` as overrides on top of [`RunConfig::default`].
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::default().with_overrides(text)
    }

    /// Parses `text` as overrides on top of `self`, key by key.
    pub fn with_overrides(&self, text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut base: toml::Table = toml::from_str(&self.to_toml()?).expect("config round-trips");
        merge(&mut base, user);
        let cfg: RunConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fails for seeds above `i64::MAX`, which TOML integers cannot hold.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config cannot be written as TOML: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.base.validate()?;
        self.head.validate()?;
        if self.study.seeds == 0 || self.study.workers == 0 {
            return Err(Error::Config("study seeds and workers must be positive".into()));
        }
        if self.study.trunks.len() < 2 {
            return Err(Error::Config("study needs at least 2 trunks".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
