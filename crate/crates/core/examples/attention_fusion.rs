//! Where the attention head earns its keep: each base model is reliable on
//! a different third of the data. The head learns which model to trust per
//! sample and beats every base by a wide margin.
//!
//! cargo run --release --example attention_fusion

use mase::data::{complementary_logits, ComplementaryConfig};
use mase::ensemble::{default_head_config, train_ensemble, StackedLogits};
use mase::eval::metrics_from_logits;
use mase::layers::ForwardCtx;

fn main() -> mase::Result<()> {
    let [train, val, test] = complementary_logits(&ComplementaryConfig::default())?;
    let mut cfg = default_head_config();
    cfg.max_epochs = 60;
    let (head, outcome) = train_ensemble(&train, &val, &cfg, 1)?;
    println!("head trained for {} epochs, best at {}", outcome.log.len(), outcome.best_epoch);

    let stacked = StackedLogits::from_logit_set(&test)?;
    let y = test.labels();
    for m in 0..stacked.num_models() {
        let r = metrics_from_logits(&stacked.model_logits(m), &y)?;
        println!("{:<7} accuracy {:.4}", stacked.models[m], r.accuracy);
    }
    let trace = head.trace(&stacked, &mut ForwardCtx::eval())?;
    println!("mase    accuracy {:.4}", metrics_from_logits(&trace.logits, &y)?.accuracy);

    println!("\nsample  label  model weights          class weights    model logit margins");
    for b in 0..6 {
        let margins: Vec<String> = (0..stacked.num_models())
            .map(|m| format!("{:+.2}", stacked.logits(b, m)[1] - stacked.logits(b, m)[0]))
            .collect();
        println!(
            "{b:>6}  {:>5}  {:.2?}  {:.2?}  {}",
            y[b],
            trace.model_weights.row(b),
            trace.class_weights.row(b),
            margins.join(" ")
        );
    }
    Ok(())
}
