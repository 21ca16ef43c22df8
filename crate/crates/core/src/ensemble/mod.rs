//! Attention-based fusion head over stacked base-model logits, its training
//! entry point and per-model test-time augmentation.

mod tta;

pub use tta::{predict_with_tta, stack_tta_logits, tta_logits};

use serde::{Deserialize, Serialize};

use crate::autodiff::{derive_seed, ParamStore, RngState, Tape, Tensor, Var};
use crate::data::{LogitRecord, LogitSet};
use crate::error::{Error, Result};
use crate::layers::{DropoutLayer, ForwardCtx, LayerNormLayer, LinearLayer, Model};
use crate::optim::{train_model, Examples, TrainConfig, TrainOutcome};

/// Hidden width of all three fusion MLPs.
pub const HEAD_HIDDEN: usize = 128;
pub const HEAD_DROPOUT: f64 = 0.3;

/// Base-model logits stacked as `[B × M × C]`, with model names in order.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedLogits {
    pub models: Vec<String>,
    pub tensor: Tensor,
}

impl StackedLogits {
    pub fn new(models: Vec<String>, tensor: Tensor) -> Result<Self> {
        let shape = tensor.shape();
        if shape.len() != 3 || shape[1] != models.len() || shape[2] == 0 {
            return Err(Error::dim("stacked_logits", shape, &[models.len()]));
        }
        if models.len() < 2 {
            return Err(Error::Config(format!("fusion needs at least 2 base models, got {}", models.len())));
        }
        Ok(StackedLogits { models, tensor })
    }

    /// Stacks per-model `[B × C]` logit matrices.
    pub fn from_model_logits(models: Vec<String>, per_model: &[Tensor]) -> Result<Self> {
        let Some(first) = per_model.first() else {
            return Err(Error::Config("no model logits to stack".into()));
        };
        let (b, c) = (first.rows(), first.last_dim());
        if let Some(bad) = per_model.iter().find(|t| t.shape() != [b, c]) {
            return Err(Error::dim("stack", first.shape(), bad.shape()));
        }
        let m = per_model.len();
        let mut data = vec![0.0; b * m * c];
        for (mi, t) in per_model.iter().enumerate() {
            for bi in 0..b {
                data[(bi * m + mi) * c..(bi * m + mi + 1) * c].copy_from_slice(t.row(bi));
            }
        }
        StackedLogits::new(models, Tensor::new(vec![b, m, c], data)?)
    }

    pub fn from_logit_set(set: &LogitSet) -> Result<Self> {
        let (m, c) = (set.models.len(), set.classes);
        let mut data = Vec::with_capacity(set.len() * m * c);
        for rec in &set.records {
            for name in &set.models {
                data.extend_from_slice(&rec.logits[name]);
            }
        }
        StackedLogits::new(set.models.clone(), Tensor::new(vec![set.len(), m, c], data)?)
    }

    /// Logit-file records for these logits; `ids` and `labels` align with rows.
    pub fn to_logit_set(&self, ids: &[String], labels: &[usize]) -> Result<LogitSet> {
        if ids.len() != self.batch() || labels.len() != self.batch() {
            return Err(Error::dim("to_logit_set", &[self.batch()], &[ids.len(), labels.len()]));
        }
        let records = (0..self.batch())
            .map(|b| LogitRecord {
                id: ids[b].clone(),
                label: labels[b] as u8,
                logits: self
                    .models
                    .iter()
                    .enumerate()
                    .map(|(m, name)| (name.clone(), self.logits(b, m).to_vec()))
                    .collect(),
            })
            .collect();
        LogitSet::from_records(records)
    }

    pub fn batch(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    pub fn classes(&self) -> usize {
        self.tensor.shape()[2]
    }

    /// Logits of sample `b` from model `m`.
    pub fn logits(&self, b: usize, m: usize) -> &[f64] {
        let (mm, c) = (self.num_models(), self.classes());
        &self.tensor.data()[(b * mm + m) * c..(b * mm + m + 1) * c]
    }

    /// `[B × C]` logits of one model.
    pub fn model_logits(&self, m: usize) -> Tensor {
        let data = (0..self.batch()).flat_map(|b| self.logits(b, m).to_vec()).collect();
        Tensor::new(vec![self.batch(), self.classes()], data).expect("consistent shape")
    }

    /// `[B × M·C]` view fed to the attention MLPs.
    pub fn flattened(&self) -> Tensor {
        let (b, m, c) = (self.batch(), self.num_models(), self.classes());
        self.tensor.clone().reshape(&[b, m * c]).expect("same length")
    }
}

/// `linear → layernorm → relu → dropout → linear`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionMlp {
    pub hidden: LinearLayer,
    pub norm: LayerNormLayer,
    pub dropout: DropoutLayer,
    pub out: LinearLayer,
}

impl FusionMlp {
    fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, rng: &mut RngState) -> Self {
        FusionMlp {
            hidden: LinearLayer::new(store, &format!("{name}.hidden"), d_in, HEAD_HIDDEN, rng),
            norm: LayerNormLayer::new(store, &format!("{name}.norm"), HEAD_HIDDEN),
            dropout: DropoutLayer::new(HEAD_DROPOUT).expect("valid rate"),
            out: LinearLayer::new(store, &format!("{name}.out"), HEAD_HIDDEN, d_out, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, ctx: &mut ForwardCtx) -> Result<Var> {
        let h = self.hidden.forward(tape, x)?;
        let h = self.norm.forward(tape, h)?;
        let h = tape.relu(h);
        let h = self.dropout.forward(tape, h, ctx)?;
        self.out.forward(tape, h)
    }
}

/// The fusion head: model attention, class attention and the meta-learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaseHead {
    pub store: ParamStore,
    pub models: Vec<String>,
    pub classes: usize,
    pub model_attention: FusionMlp,
    pub class_attention: FusionMlp,
    pub meta: FusionMlp,
}

/// Every intermediate of one fusion pass.
#[derive(Debug, Clone, Copy)]
pub struct FusionVars {
    pub model_weights: Var,
    pub class_weights: Var,
    /// `m = Σᵢ wᵢ⁽ᵐ⁾ sᵢ`.
    pub mixed: Var,
    /// `c = m ⊙ w⁽ᶜ⁾`.
    pub modulated: Var,
    pub logits: Var,
}

/// Concrete values of [`FusionVars`].
#[derive(Debug, Clone, PartialEq)]
pub struct FusionTrace {
    pub model_weights: Tensor,
    pub class_weights: Tensor,
    pub mixed: Tensor,
    pub modulated: Tensor,
    pub logits: Tensor,
}

impl MaseHead {
    pub fn new(models: Vec<String>, classes: usize, rng: &mut RngState) -> Result<Self> {
        if models.len() < 2 {
            return Err(Error::Config(format!("fusion needs at least 2 base models, got {}", models.len())));
        }
        if classes < 2 {
            return Err(Error::Config(format!("fusion needs at least 2 classes, got {classes}")));
        }
        let mc = models.len() * classes;
        let mut store = ParamStore::new();
        let model_attention = FusionMlp::new(&mut store, "model_attention", mc, models.len(), rng);
        let class_attention = FusionMlp::new(&mut store, "class_attention", mc, classes, rng);
        let meta = FusionMlp::new(&mut store, "meta", 2 * classes, classes, rng);
        Ok(MaseHead {
            store,
            models,
            classes,
            model_attention,
            class_attention,
            meta,
        })
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    fn check(&self, stacked: &StackedLogits) -> Result<()> {
        if stacked.models != self.models || stacked.classes() != self.classes {
            return Err(Error::dim(
                "mase_head",
                stacked.tensor.shape(),
                &[stacked.batch(), self.num_models(), self.classes],
            ));
        }
        Ok(())
    }

    /// Builds the full fusion graph for `s[B × M × C]`.
    pub fn fuse_vars(&self, tape: &mut Tape<'_>, s: Var, ctx: &mut ForwardCtx) -> Result<FusionVars> {
        let (m, c) = (self.num_models(), self.classes);
        let b = match *tape.shape(s) {
            [b, mm, cc] if mm == m && cc == c => b,
            ref sh => return Err(Error::dim("fuse", sh, &[sh.first().copied().unwrap_or(0), m, c])),
        };
        let flat = tape.reshape(s, &[b, m * c])?;
        let a = self.model_attention.forward(tape, flat, ctx)?;
        let model_weights = tape.softmax(a);
        let a = self.class_attention.forward(tape, flat, ctx)?;
        let class_weights = tape.softmax(a);
        self.fuse_given(tape, s, model_weights, class_weights, ctx)
    }

    /// Fusion with externally supplied attention weights.
    pub fn fuse_given(
        &self,
        tape: &mut Tape<'_>,
        s: Var,
        model_weights: Var,
        class_weights: Var,
        ctx: &mut ForwardCtx,
    ) -> Result<FusionVars> {
        let mixed = tape.mix_models(model_weights, s)?;
        let modulated = tape.mul(mixed, class_weights)?;
        let joined = tape.concat_cols(mixed, modulated)?;
        let logits = self.meta.forward(tape, joined, ctx)?;
        Ok(FusionVars {
            model_weights,
            class_weights,
            mixed,
            modulated,
            logits,
        })
    }

    pub fn trace(&self, stacked: &StackedLogits, ctx: &mut ForwardCtx) -> Result<FusionTrace> {
        self.check(stacked)?;
        let mut tape = Tape::with_params(&self.store);
        let s = tape.constant(stacked.tensor.clone());
        let v = self.fuse_vars(&mut tape, s, ctx)?;
        Ok(collect_trace(&tape, v))
    }

    /// Fusion with forced attention weights `[B × M]` and `[B × C]`.
    pub fn trace_given(
        &self,
        stacked: &StackedLogits,
        model_weights: &Tensor,
        class_weights: &Tensor,
    ) -> Result<FusionTrace> {
        self.check(stacked)?;
        let mut tape = Tape::with_params(&self.store);
        let s = tape.constant(stacked.tensor.clone());
        let wm = tape.constant(model_weights.clone());
        let wc = tape.constant(class_weights.clone());
        let v = self.fuse_given(&mut tape, s, wm, wc, &mut ForwardCtx::eval())?;
        Ok(collect_trace(&tape, v))
    }
}

fn collect_trace(tape: &Tape<'_>, v: FusionVars) -> FusionTrace {
    FusionTrace {
        model_weights: tape.value(v.model_weights).clone(),
        class_weights: tape.value(v.class_weights).clone(),
        mixed: tape.value(v.mixed).clone(),
        modulated: tape.value(v.modulated).clone(),
        logits: tape.value(v.logits).clone(),
    }
}

/// The head consumes flattened `[B × M·C]` rows so it can reuse the generic trainer.
impl Model for MaseHead {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn input_width(&self) -> usize {
        self.num_models() * self.classes
    }

    fn classes(&self) -> usize {
        self.classes
    }

    fn forward(&self, tape: &mut Tape<'_>, x: Var, ctx: &mut ForwardCtx) -> Result<Var> {
        let b = tape.shape(x)[0];
        let s = tape.reshape(x, &[b, self.num_models(), self.classes])?;
        Ok(self.fuse_vars(tape, s, ctx)?.logits)
    }
}

/// Per-sample model weights `[B × M]`; rows sum to 1.
pub fn model_attention(stacked: &StackedLogits, head: &MaseHead, ctx: &mut ForwardCtx) -> Result<Tensor> {
    Ok(head.trace(stacked, ctx)?.model_weights)
}

/// Per-sample class weights `[B × C]`; rows sum to 1.
pub fn class_attention(stacked: &StackedLogits, head: &MaseHead, ctx: &mut ForwardCtx) -> Result<Tensor> {
    Ok(head.trace(stacked, ctx)?.class_weights)
}

/// Final fused logits `[B × C]`.
pub fn fuse(stacked: &StackedLogits, head: &MaseHead, ctx: &mut ForwardCtx) -> Result<Tensor> {
    Ok(head.trace(stacked, ctx)?.logits)
}

/// The base recipe without mixup and without the weighted sampler. Base
/// logits already come from class-balanced training, so the head corrects
/// imbalance through the focal-loss class weights alone.
pub fn default_head_config() -> TrainConfig {
    TrainConfig {
        use_mixup: false,
        weighted_sampling: false,
        ..TrainConfig::default()
    }
}

/// Trains a fresh head on frozen base-model logits.
///
/// Parameters are initialised from `init_seed`; sampling, dropout and mixup
/// draw from `cfg.seed`. Returns the best-validation-accuracy head.
pub fn train_ensemble(
    train: &LogitSet,
    val: &LogitSet,
    cfg: &TrainConfig,
    init_seed: u64,
) -> Result<(MaseHead, TrainOutcome)> {
    if train.models != val.models {
        return Err(Error::Config(format!(
            "train logits list models {:?} but validation lists {:?}",
            train.models, val.models
        )));
    }
    if train.classes != val.classes {
        return Err(Error::Config(format!(
            "train logits have {} classes but validation has {}",
            train.classes, val.classes
        )));
    }
    let train_s = StackedLogits::from_logit_set(train)?;
    let val_s = StackedLogits::from_logit_set(val)?;
    let mut rng = RngState::new(derive_seed(init_seed, "mase-head", 0));
    let mut head = MaseHead::new(train.models.clone(), train.classes, &mut rng)?;
    let train_x = Examples::new(train_s.flattened(), train.labels())?;
    let val_x = Examples::new(val_s.flattened(), val.labels())?;
    let outcome = train_model(&mut head, &train_x, &val_x, cfg, None)?;
    Ok((head, outcome))
}
