//! Finite-difference verification of every differentiable component.

use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_check, grad_check_fn, ParamStore, RngState, Tape, Tensor, Var, DEFAULT_STEP};
use crate::ensemble::MaseHead;
use crate::error::Result;
use crate::layers::{AdapterHead, BaseModel, DropoutLayer, ForwardCtx, LayerNormLayer, LinearLayer, Model, TrunkPreset};
use crate::loss::{focal_loss, one_hot, weighted_cross_entropy, FocalConfig};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Inputs are redrawn until every relu input is at least this far from the
/// kink, so no `±h` perturbation can switch a unit on or off.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub component: String,
    pub max_rel_error: f64,
    pub coordinates: usize,
    pub passed: bool,
}

fn random(shape: &[usize], scale: f64, rng: &mut RngState) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal(0.0, scale)).collect()).expect("shape matches")
}

/// `Σ y ⊙ R` for a fixed random `R`, so every output coordinate matters.
fn project(tape: &mut Tape<'_>, y: Var, r: &Tensor) -> Result<Var> {
    let r = tape.constant(r.clone());
    let p = tape.mul(y, r)?;
    Ok(tape.sum(p))
}

fn kink_free<F>(store: &ParamStore, forward: F, mut draw: impl FnMut() -> Tensor) -> Result<Tensor>
where
    F: Fn(&mut Tape<'_>, Var) -> Result<Var>,
{
    let mut best = (0.0, None);
    for _ in 0..1000 {
        let x = draw();
        let mut tape = Tape::with_params(store);
        let xv = tape.constant(x.clone());
        forward(&mut tape, xv)?;
        let margin = tape.relu_margin();
        if margin >= KINK_MARGIN {
            return Ok(x);
        }
        if margin > best.0 {
            best = (margin, Some(x));
        }
    }
    Ok(best.1.expect("at least one draw"))
}

fn entry(component: &str, r: crate::autodiff::GradCheckReport) -> GradCheckEntry {
    GradCheckEntry {
        component: component.to_string(),
        passed: r.passes(GRADCHECK_TOLERANCE),
        max_rel_error: r.max_rel_error,
        coordinates: r.coordinates,
    }
}

/// Checks layers, losses and the fusion head (dropout in eval mode) with
/// central differences of step `1e-5`.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCheckEntry>> {
    let mut rng = RngState::new(seed);
    let h = DEFAULT_STEP;
    let mut out = Vec::new();
    let batch = 3;

    // linear and layernorm, both parameters and inputs
    {
        let mut store = ParamStore::new();
        let lin = LinearLayer::new(&mut store, "linear", 5, 4, &mut rng);
        let norm = LayerNormLayer::new(&mut store, "layernorm", 4);
        for t in store.tensors_mut() {
            *t = random(t.shape(), 0.5, &mut rng);
        }
        let x = random(&[batch, 5], 1.0, &mut rng);
        let r = random(&[batch, 4], 1.0, &mut rng);
        let rep = grad_check(
            &store,
            |tape| {
                let xv = tape.constant(x.clone());
                let y = lin.forward(tape, xv)?;
                project(tape, y, &r)
            },
            h,
        )?;
        out.push(entry("linear", rep));
        let rep = grad_check(
            &store,
            |tape| {
                let xv = tape.constant(x.clone());
                let y = lin.forward(tape, xv)?;
                let y = norm.forward(tape, y)?;
                project(tape, y, &r)
            },
            h,
        )?;
        out.push(entry("layernorm", rep));
        let mut with_input = store.clone();
        let xi = with_input.add("input", random(&[batch, 4], 1.0, &mut rng));
        let rep = grad_check(
            &with_input,
            |tape| {
                let xv = tape.param(xi);
                let y = norm.forward(tape, xv)?;
                project(tape, y, &r)
            },
            h,
        )?;
        out.push(entry("layernorm-input", rep));
    }

    // dropout is the identity in eval mode
    {
        let drop = DropoutLayer::new(0.3)?;
        let r = random(&[batch, 6], 1.0, &mut rng);
        let rep = grad_check_fn(
            random(&[batch, 6], 1.0, &mut rng),
            |tape, x| {
                let y = drop.forward(tape, x, &mut ForwardCtx::eval())?;
                project(tape, y, &r)
            },
            h,
        )?;
        out.push(entry("dropout-eval", rep));
    }

    {
        let mut store = ParamStore::new();
        let head = AdapterHead::new(&mut store, "adapter", 7, 2, &mut rng);
        let x = kink_free(
            &store,
            |tape, x| head.forward(tape, x, &mut ForwardCtx::eval()),
            || random(&[batch, 7], 1.0, &mut rng),
        )?;
        let y = one_hot(&[0, 1, 1], 2)?;
        let focal = FocalConfig::default();
        let rep = grad_check(
            &store,
            |tape| {
                let xv = tape.constant(x.clone());
                let logits = head.forward(tape, xv, &mut ForwardCtx::eval())?;
                focal_loss(tape, logits, &y, &focal)
            },
            h,
        )?;
        out.push(entry("adapter-head", rep));
    }

    for preset in TrunkPreset::ALL {
        let model = BaseModel::new(preset, 3, 3, 2, &mut rng);
        let x = kink_free(
            model.params(),
            |tape, x| model.forward(tape, x, &mut ForwardCtx::eval()),
            || Tensor::new(vec![batch, 9], (0..batch * 9).map(|_| rng.uniform()).collect()).expect("shape matches"),
        )?;
        let y = one_hot(&[1, 0, 1], 2)?;
        let focal = FocalConfig::default();
        let rep = grad_check(
            model.params(),
            |tape| {
                let xv = tape.constant(x.clone());
                let logits = model.forward(tape, xv, &mut ForwardCtx::eval())?;
                focal_loss(tape, logits, &y, &focal)
            },
            h,
        )?;
        out.push(entry(&format!("base-{preset}"), rep));
    }

    // losses with respect to logits, with hard and soft targets
    {
        let logits = random(&[4, 2], 2.0, &mut rng);
        let soft = Tensor::from_rows(&[[1.0, 0.0], [0.3, 0.7], [0.0, 1.0], [0.55, 0.45]])?;
        for (name, gamma) in [("focal-loss", 2.0), ("focal-loss-gamma0.5", 0.5)] {
            let cfg = FocalConfig::new(gamma, vec![0.3258, 1.6742])?;
            let rep = grad_check_fn(logits.clone(), |tape, z| focal_loss(tape, z, &soft, &cfg), h)?;
            out.push(entry(name, rep));
        }
        let rep = grad_check_fn(
            logits,
            |tape, z| weighted_cross_entropy(tape, z, &soft, &[0.3258, 1.6742]),
            h,
        )?;
        out.push(entry("weighted-cross-entropy", rep));
    }

    {
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let head = MaseHead::new(names, 2, &mut rng)?;
        let x = kink_free(
            head.params(),
            |tape, x| head.forward(tape, x, &mut ForwardCtx::eval()),
            || random(&[batch, 6], 2.0, &mut rng),
        )?;
        let y = Tensor::from_rows(&[[1.0, 0.0], [0.2, 0.8], [0.0, 1.0]])?;
        let focal = FocalConfig::default();
        let rep = grad_check(
            head.params(),
            |tape| {
                let xv = tape.constant(x.clone());
                let logits = head.forward(tape, xv, &mut ForwardCtx::eval())?;
                focal_loss(tape, logits, &y, &focal)
            },
            h,
        )?;
        out.push(entry("mase-head", rep));
        let mut with_input = head.params().clone();
        let xi = with_input.add("stacked", x.clone());
        let rep = grad_check(
            &with_input,
            |tape| {
                let xv = tape.param(xi);
                let logits = head.forward(tape, xv, &mut ForwardCtx::eval())?;
                focal_loss(tape, logits, &y, &focal)
            },
            h,
        )?;
        out.push(entry("mase-head-input", rep));
    }
    Ok(out)
}

pub fn format_gradcheck(entries: &[GradCheckEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(&format!(
            "{:<6} {:<26} max rel error {:.3e} over {} coordinates\n",
            if e.passed { "ok" } else { "FAIL" },
            e.component,
            e.max_rel_error,
            e.coordinates
        ));
    }
    s
}
