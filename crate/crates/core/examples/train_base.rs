//! Trains one toy base model with the full recipe (weighted sampling,
//! mixup, focal loss, AdamW, warm restarts, accumulation, early stopping).
//!
//! cargo run --release --example train_base -- [densetoy|efftoy|vittoy] [epochs]

use mase::autodiff::derive_seed;
use mase::cli::commands::{evaluate_base, gen_data, train_base};
use mase::cli::RunConfig;
use mase::layers::TrunkPreset;

fn main() -> mase::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset: TrunkPreset = args.next().as_deref().unwrap_or("vittoy").parse()?;
    let epochs = args.next().map_or(10, |e| e.parse().expect("epochs is a number"));

    let mut cfg = RunConfig::desk_scale();
    cfg.base.max_epochs = epochs;
    let split = gen_data(&cfg, None)?;
    let trained = train_base(
        preset,
        &split,
        &cfg,
        derive_seed(cfg.seed, "init", 0),
        derive_seed(cfg.seed, "train", 0),
    )?;

    println!("epoch  train loss  val acc  lr");
    for r in &trained.outcome.log {
        println!("{:>5}  {:>10.4}  {:>7.4}  {:.3e}", r.epoch, r.train_loss, r.val_acc, r.lr);
    }
    println!(
        "best epoch {} ({} optimizer steps)",
        trained.outcome.best_epoch, trained.outcome.optimizer_steps
    );
    let report = evaluate_base(trained.checkpoint.as_base()?, &split.test, Some(&cfg.tta))?;
    println!("\n{preset} on the test split with TTA:\n{}", report.table());
    Ok(())
}
