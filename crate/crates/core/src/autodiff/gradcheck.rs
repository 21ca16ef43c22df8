use super::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Finite-difference step used by the verification suite.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − central| / max(1, |central|)` over every coordinate.
    pub max_rel_error: f64,
    /// Per-parameter maxima, in store order.
    pub per_param: Vec<(String, f64)>,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// `(f(x + h) − f(x − h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn eval_loss<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    let mut tape = Tape::with_params(store);
    let out = f(&mut tape)?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::dim("grad_check", v.shape(), &[1]));
    }
    let v = v.item();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {v} during gradient check")));
    }
    Ok(v)
}

/// Checks every parameter of `store` for the scalar function `f`.
///
/// `f` must be deterministic: stochastic layers belong in eval mode.
pub fn grad_check<F>(store: &ParamStore, f: F, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    eval_loss(store, &f)?;
    let analytic = {
        let mut tape = Tape::with_params(store);
        let out = f(&mut tape)?;
        tape.backward(out)?.dense_params(store)
    };

    let mut probe = store.clone();
    let mut per_param = Vec::with_capacity(store.len());
    let mut worst = 0.0f64;
    let mut coordinates = 0;
    for id in store.ids() {
        let mut param_worst = 0.0f64;
        for i in 0..store.get(id).len() {
            let orig = store.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + h;
            let plus = eval_loss(&probe, &f)?;
            probe.get_mut(id).data_mut()[i] = orig - h;
            let minus = eval_loss(&probe, &f)?;
            probe.get_mut(id).data_mut()[i] = orig;

            let central = (plus - minus) / (2.0 * h);
            let err = (analytic[id.0][i] - central).abs() / central.abs().max(1.0);
            param_worst = param_worst.max(err);
            coordinates += 1;
        }
        worst = worst.max(param_worst);
        per_param.push((store.name(id).to_string(), param_worst));
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        per_param,
        coordinates,
    })
}

/// Convenience form for a function of a single tensor input.
pub fn grad_check_fn<F>(x: Tensor, f: F, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut store = ParamStore::new();
    let id = store.add("x", x);
    grad_check(
        &store,
        |tape| {
            let v = tape.param(id);
            f(tape, v)
        },
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let r = grad_check_fn(Tensor::scalar(3.0), |t, x| t.mul(x, x), DEFAULT_STEP).unwrap();
        assert!(r.max_rel_error < 1e-9, "{}", r.max_rel_error);
        let c = central_difference(|x| x * x, 3.0, 1e-5);
        assert!((c - 6.0).abs() < 1e-9);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let r = grad_check_fn(
            Tensor::vector(vec![1.0, 2.0]),
            |t, _| Ok(t.constant(Tensor::scalar(4.0))),
            DEFAULT_STEP,
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn non_finite_loss_is_numeric_error() {
        let r = grad_check_fn(
            Tensor::scalar(1.0),
            |t, _| Ok(t.constant(Tensor::scalar(f64::NAN))),
            DEFAULT_STEP,
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
