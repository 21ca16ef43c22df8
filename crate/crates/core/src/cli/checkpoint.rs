use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::data::io::write_atomic;
use crate::ensemble::MaseHead;
use crate::error::{Error, Result};
use crate::layers::BaseModel;
use crate::optim::TrainOutcome;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const HEAD_KIND: &str = "mase-head";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CheckpointModel {
    Base(BaseModel),
    MaseHead(MaseHead),
}

/// Training metadata kept alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub best_epoch: u64,
    pub best_val_accuracy: f64,
    pub epochs_run: u64,
    pub stopped_early: bool,
}

impl From<&TrainOutcome> for TrainingSummary {
    fn from(o: &TrainOutcome) -> Self {
        TrainingSummary {
            best_epoch: o.best_epoch,
            best_val_accuracy: o.best_val_accuracy,
            epochs_run: o.log.len() as u64,
            stopped_early: o.stopped_early,
        }
    }
}

/// Versioned JSON checkpoint. Reals are written in shortest round-trip
/// form, so loading reproduces every parameter bitwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Trunk id for base models, `"mase-head"` for the fusion head.
    pub kind: String,
    pub init_seed: u64,
    pub train_seed: u64,
    pub config: RunConfig,
    pub training: Option<TrainingSummary>,
    pub model: CheckpointModel,
}

impl Checkpoint {
    pub fn base(model: BaseModel, config: RunConfig, init_seed: u64, train_seed: u64, training: Option<TrainingSummary>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            kind: model.id().to_string(),
            init_seed,
            train_seed,
            config,
            training,
            model: CheckpointModel::Base(model),
        }
    }

    pub fn head(model: MaseHead, config: RunConfig, init_seed: u64, train_seed: u64, training: Option<TrainingSummary>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            kind: HEAD_KIND.to_string(),
            init_seed,
            train_seed,
            config,
            training,
            model: CheckpointModel::MaseHead(model),
        }
    }

    pub fn as_base(&self) -> Result<&BaseModel> {
        match &self.model {
            CheckpointModel::Base(m) => Ok(m),
            CheckpointModel::MaseHead(_) => Err(Error::Config(format!("checkpoint '{}' is not a base model", self.kind))),
        }
    }

    pub fn as_head(&self) -> Result<&MaseHead> {
        match &self.model {
            CheckpointModel::MaseHead(h) => Ok(h),
            CheckpointModel::Base(_) => Err(Error::Config(format!("checkpoint '{}' is not a fusion head", self.kind))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    /// Refuses any `format_version` other than the current one.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: Option<u64>,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        match header.format_version {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            Some(v) => {
                return Err(Error::Config(format!(
                    "unsupported checkpoint format version {v} (this build reads version {CHECKPOINT_VERSION})"
                )))
            }
            None => return Err(Error::Config("checkpoint has no format_version".into())),
        }
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
