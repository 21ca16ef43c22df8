//! Inverse-frequency class weights, focal loss against cross-entropy, and
//! the weighted sampler's effect on class shares.
//!
//! cargo run --example class_imbalance

use mase::autodiff::{RngState, Tape, Tensor};
use mase::data::weighted_sampler;
use mase::loss::{compute_class_weights, focal_loss, focal_term, one_hot, weighted_cross_entropy, FocalConfig};

fn main() -> mase::Result<()> {
    let counts: [u64; 2] = [4342, 845];
    let weights = compute_class_weights(&counts)?;
    println!("counts {counts:?} -> weights {:.4?}", weights.weights);

    println!("\n p_t    CE       focal γ=2");
    for p in [0.1, 0.5, 0.9, 0.99] {
        println!("{p:>5} {:>8.4} {:>8.4}", focal_term(p, 1.0, 0.0), focal_term(p, 1.0, 2.0));
    }

    let logits = Tensor::from_rows(&[[2.0, -1.0], [0.2, 0.1], [-0.5, 1.5]])?;
    let targets = one_hot(&[0, 1, 1], 2)?;
    let mut tape = Tape::new();
    let z = tape.leaf(logits);
    let focal = focal_loss(&mut tape, z, &targets, &FocalConfig::from_weights(2.0, &weights)?)?;
    let ce = weighted_cross_entropy(&mut tape, z, &targets, &weights.weights)?;
    println!("\nbatch loss: weighted CE {:.4}, focal {:.4}", tape.value(ce).item(), tape.value(focal).item());

    let labels: Vec<usize> = std::iter::repeat_n(0, counts[0] as usize).chain(std::iter::repeat_n(1, counts[1] as usize)).collect();
    let draws = weighted_sampler(&labels, &weights, 100_000, &mut RngState::new(0))?;
    let share = draws.iter().filter(|&&i| labels[i] == 1).count() as f64 / draws.len() as f64;
    println!("malignant share: {:.3} in data, {share:.3} in weighted draws", counts[1] as f64 / labels.len() as f64);
    Ok(())
}
