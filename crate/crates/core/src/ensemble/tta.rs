use rayon::prelude::*;

use super::{MaseHead, StackedLogits};
use crate::autodiff::Tensor;
use crate::data::{tta_expand, Patch, TtaConfig};
use crate::error::{Error, Result};
use crate::layers::{predict_logits, ForwardCtx, Model};

/// Eval-mode logits of `model` averaged over the original and every
/// transformed view, `(f(x) + Σᵢ f(Tᵢ(x))) / (N + 1)`, in logit space.
pub fn tta_logits<M: Model + ?Sized>(model: &M, patches: &[Patch], tta: &TtaConfig) -> Result<Tensor> {
    let Some(first) = patches.first() else {
        return Err(Error::Config("no patches to predict".into()));
    };
    let views = tta.views();
    let width = first.height * first.width;
    let mut stacked = Vec::with_capacity(patches.len() * views * width);
    for p in patches {
        for v in tta_expand(p, tta)? {
            if v.pixels.len() != width {
                return Err(Error::dim("tta_logits", &[first.height, first.width], &[v.height, v.width]));
            }
            stacked.extend(v.pixels);
        }
    }
    // rows are grouped per patch: [p0 v0, p0 v1, ..., p1 v0, ...]
    let all = predict_logits(model, &Tensor::new(vec![patches.len() * views, width], stacked)?)?;
    let c = model.classes();
    let mut out = vec![0.0; patches.len() * c];
    for (i, row) in out.chunks_mut(c).enumerate() {
        for v in 0..views {
            row.iter_mut().zip(all.row(i * views + v)).for_each(|(o, x)| *o += x);
        }
        row.iter_mut().for_each(|o| *o /= views as f64);
    }
    Tensor::new(vec![patches.len(), c], out)
}

/// Applies TTA to each base model independently, then stacks the averaged logits.
pub fn stack_tta_logits<M: Model + Sync>(
    models: &[(String, M)],
    patches: &[Patch],
    tta: &TtaConfig,
) -> Result<StackedLogits> {
    let classes = models.first().map(|(_, m)| m.classes());
    if models.iter().any(|(_, m)| Some(m.classes()) != classes) {
        return Err(Error::Config("base models disagree on the number of classes".into()));
    }
    let per_model = models
        .par_iter()
        .map(|(_, m)| tta_logits(m, patches, tta))
        .collect::<Result<Vec<_>>>()?;
    StackedLogits::from_model_logits(models.iter().map(|(n, _)| n.clone()).collect(), &per_model)
}

/// TTA-averaged base logits and the fused prediction made from them.
pub fn predict_with_tta<M: Model + Sync>(
    models: &[(String, M)],
    patches: &[Patch],
    tta: &TtaConfig,
    head: &MaseHead,
) -> Result<(StackedLogits, Tensor)> {
    let stacked = stack_tta_logits(models, patches, tta)?;
    let logits = super::fuse(&stacked, head, &mut ForwardCtx::eval())?;
    Ok((stacked, logits))
}
