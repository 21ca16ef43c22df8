//! Builds a tiny graph on the tape, backpropagates, and checks the result
//! against central differences.
//!
//! cargo run --example autodiff

use mase::autodiff::{grad_check, ParamStore, Tape, Tensor};

fn main() -> mase::Result<()> {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_rows(&[[0.5, -1.0], [2.0, 0.25]])?);
    let x = Tensor::from_rows(&[[1.0, 2.0], [-1.0, 0.5], [0.3, 0.3]])?;

    // loss = mean(log_softmax(x · wᵀ)[:, 0])
    let forward = |tape: &mut Tape<'_>| {
        let wv = tape.param(w);
        let xv = tape.constant(x.clone());
        let z = tape.matmul_t(xv, wv)?;
        let ls = tape.log_softmax(z);
        let pick = tape.constant(Tensor::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])?);
        let picked = tape.mul(ls, pick)?;
        Ok(tape.mean(picked))
    };

    let mut tape = Tape::with_params(&store);
    let loss = forward(&mut tape)?;
    let grads = tape.backward(loss)?;
    println!("loss      {:.6}", tape.value(loss).item());
    println!("dloss/dw  {:?}", grads.param(w).unwrap());

    let report = grad_check(&store, forward, 1e-5)?;
    println!("finite-difference max relative error {:.2e}", report.max_rel_error);
    Ok(())
}
