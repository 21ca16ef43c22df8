use serde::{Deserialize, Serialize};

use super::{AdamWConfig, AdamWState, CosineRestartSchedule, EarlyStopDecision, EarlyStopState};
use crate::autodiff::{RngState, Tape, Tensor};
use crate::data::{mixup, weighted_sampler, MixupConfig};
use crate::error::{Error, Result};
use crate::eval::argmax_rows;
use crate::layers::{predict_logits, ForwardCtx, Model};
use crate::loss::{compute_class_weights, focal_loss, one_hot, ClassWeights, FocalConfig};

/// Per-row train-time augmentation applied to freshly sampled inputs.
pub type RowAugment<'a> = &'a (dyn Fn(&[f64], &mut RngState) -> Vec<f64> + Sync);

/// Input rows with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Examples {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self> {
        if inputs.shape().len() != 2 || inputs.rows() != labels.len() {
            return Err(Error::dim("examples", inputs.shape(), &[labels.len()]));
        }
        Ok(Examples { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.inputs.last_dim()
    }

    pub fn class_counts(&self, classes: usize) -> Vec<u64> {
        let mut c = vec![0u64; classes];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }

    fn gather(&self, idx: &[usize], augment: Option<RowAugment>, rng: &mut RngState) -> Result<(Tensor, Vec<usize>)> {
        let w = self.width();
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            let row = self.inputs.row(i);
            match augment {
                Some(f) => data.extend(f(row, rng)),
                None => data.extend_from_slice(row),
            }
        }
        Ok((Tensor::new(vec![idx.len(), w], data)?, idx.iter().map(|&i| self.labels[i]).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: u64,
    pub accum_steps: usize,
    pub use_mixup: bool,
    pub mixup: MixupConfig,
    pub focal_gamma: f64,
    /// Use inverse-frequency class weights as the focal α (otherwise α = 1).
    pub class_weighted_loss: bool,
    /// Draw each epoch through the weighted random sampler (otherwise a shuffle).
    pub weighted_sampling: bool,
    pub adamw: AdamWConfig,
    pub schedule: CosineRestartSchedule,
    pub patience: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            max_epochs: 200,
            accum_steps: 2,
            use_mixup: true,
            mixup: MixupConfig::default(),
            focal_gamma: 2.0,
            class_weighted_loss: true,
            weighted_sampling: true,
            adamw: AdamWConfig::default(),
            schedule: CosineRestartSchedule::default(),
            patience: 60,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.accum_steps == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, accum_steps, max_epochs and patience must be positive".into(),
            ));
        }
        if self.use_mixup {
            self.mixup.validate()?;
        }
        if !(self.focal_gamma >= 0.0) {
            return Err(Error::Config(format!("focal gamma must be >= 0, got {}", self.focal_gamma)));
        }
        Ok(())
    }

    /// Samples per optimizer step.
    pub fn effective_batch(&self) -> usize {
        self.batch_size * self.accum_steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub train_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    pub best_epoch: u64,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
    pub class_weights: ClassWeights,
    pub optimizer_steps: u64,
}

/// Mean focal loss of one microbatch and its parameter gradients.
pub fn microbatch_gradients<M: Model + ?Sized>(
    model: &M,
    inputs: &Tensor,
    targets: &Tensor,
    focal: &FocalConfig,
    ctx: &mut ForwardCtx,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut tape = Tape::with_params(model.params());
    let x = tape.constant(inputs.clone());
    let logits = model.forward(&mut tape, x, ctx)?;
    let loss = focal_loss(&mut tape, logits, targets, focal)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {value}")));
    }
    let grads = tape.backward(loss)?.dense_params(model.params());
    Ok((value, grads))
}

/// Averages microbatch gradients and applies a single AdamW step.
///
/// Microbatch `k` sees dropout masks keyed by its row offset within the
/// concatenated batch, so equal-sized microbatches reproduce the full-batch
/// step. Returns the mean microbatch loss.
pub fn accumulate_and_step<M: Model + ?Sized>(
    model: &mut M,
    opt: &mut AdamWState,
    microbatches: &[(Tensor, Tensor)],
    focal: &FocalConfig,
    lr: f64,
    mask_seed: u64,
) -> Result<f64> {
    if microbatches.is_empty() {
        return Err(Error::Config("no microbatches to accumulate".into()));
    }
    let mut total: Option<Vec<Vec<f64>>> = None;
    let mut loss_sum = 0.0;
    let mut offset = 0u64;
    for (x, y) in microbatches {
        let mut ctx = ForwardCtx::train(mask_seed).with_row_offset(offset);
        let (loss, grads) = microbatch_gradients(&*model, x, y, focal, &mut ctx)?;
        offset += x.rows() as u64;
        loss_sum += loss;
        match total.as_mut() {
            None => total = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.iter_mut().zip(g).for_each(|(s, v)| *s += v);
                }
            }
        }
    }
    let k = microbatches.len() as f64;
    let mut grads = total.expect("non-empty");
    if microbatches.len() > 1 {
        grads.iter_mut().flatten().for_each(|g| *g /= k);
    }
    opt.step(model.params_mut(), &grads, lr)?;
    Ok(loss_sum / k)
}

/// Fraction of rows whose argmax logit equals the label.
pub(crate) fn accuracy_of<M: Model + ?Sized>(model: &M, data: &Examples) -> Result<f64> {
    let logits = predict_logits(model, &data.inputs)?;
    let preds = argmax_rows(&logits);
    let hits = preds.iter().zip(&data.labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Trains `model` and leaves it holding the best-validation-accuracy parameters.
///
/// Each epoch draws `|train|` samples (weighted or shuffled), optionally
/// augments and mixes them, and takes one AdamW step per `accum_steps`
/// microbatches at the epoch's scheduled learning rate. On a non-finite loss
/// the model is restored to its last good parameters and a numeric error is
/// returned.
pub fn train_model<M: Model + ?Sized>(
    model: &mut M,
    train: &Examples,
    val: &Examples,
    cfg: &TrainConfig,
    augment: Option<RowAugment>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let classes = model.classes();
    if train.width() != model.input_width() || val.width() != model.input_width() {
        return Err(Error::dim("train_model", &[train.width(), val.width()], &[model.input_width()]));
    }
    if val.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let counts = train.class_counts(classes);
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Config(format!("training data must contain every class, got counts {counts:?}")));
    }
    let class_weights = compute_class_weights(&counts)?;
    let focal = if cfg.class_weighted_loss {
        FocalConfig::from_weights(cfg.focal_gamma, &class_weights)?
    } else {
        FocalConfig::new(cfg.focal_gamma, vec![1.0; classes])?
    };

    let mut rng = RngState::new(cfg.seed);
    let mut opt = AdamWState::new(model.params(), cfg.adamw);
    let mut early = EarlyStopState::new(cfg.patience);
    let mut best = model.params().clone();
    let mut log = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.schedule.lr(epoch);
        let order = if cfg.weighted_sampling {
            weighted_sampler(&train.labels, &class_weights, train.len(), &mut rng)?
        } else {
            rng.permutation(train.len())
        };

        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for group in order.chunks(cfg.effective_batch()) {
            let mut micro = Vec::with_capacity(cfg.accum_steps);
            for idx in group.chunks(cfg.batch_size) {
                let (x, labels) = train.gather(idx, augment, &mut rng)?;
                let y = one_hot(&labels, classes)?;
                if cfg.use_mixup {
                    let m = mixup(&x, &y, &cfg.mixup, &mut rng)?;
                    micro.push((m.inputs, m.targets));
                } else {
                    micro.push((x, y));
                }
            }
            let mask_seed = rng.next_u64();
            match accumulate_and_step(model, &mut opt, &micro, &focal, lr, mask_seed) {
                Ok(loss) => {
                    loss_sum += loss;
                    steps += 1;
                }
                Err(Error::Numeric(msg)) => {
                    *model.params_mut() = best;
                    return Err(Error::Numeric(format!(
                        "training diverged at epoch {epoch} ({msg}); parameters restored to epoch {}",
                        early.best_epoch.map_or("init".to_string(), |e| e.to_string())
                    )));
                }
                Err(e) => return Err(e),
            }
        }

        let val_acc = accuracy_of(&*model, val)?;
        log.push(EpochRecord {
            epoch,
            train_loss: loss_sum / steps.max(1) as f64,
            val_acc,
            lr,
        });
        match early.update(val_acc, epoch) {
            EarlyStopDecision::Continue { improved: true } => best = model.params().clone(),
            EarlyStopDecision::Continue { improved: false } => {}
            EarlyStopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }

    *model.params_mut() = best;
    Ok(TrainOutcome {
        log,
        best_epoch: early.best_epoch.unwrap_or(0),
        best_val_accuracy: early.best_accuracy.unwrap_or(0.0),
        stopped_early,
        class_weights,
        optimizer_steps: opt.steps(),
    })
}
