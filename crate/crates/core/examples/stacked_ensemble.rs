//! The full stacking pipeline on synthetic patches: train three bases,
//! export their TTA logits, train the attention head on the train-split
//! logits, and compare everything on the test split.
//!
//! cargo run --release --example stacked_ensemble -- [out-dir]

use std::path::PathBuf;

use mase::autodiff::derive_seed;
use mase::cli::commands::{evaluate_columns, evaluate_head, export_logits, gen_data, train_base, train_head};
use mase::cli::RunConfig;
use mase::data::write_logits;
use mase::layers::TrunkPreset;

fn main() -> mase::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let cfg = RunConfig::desk_scale();
    let split = gen_data(&cfg, None)?;

    let mut bases = Vec::new();
    for preset in TrunkPreset::ALL {
        let t = train_base(
            preset,
            &split,
            &cfg,
            derive_seed(cfg.seed, &format!("init-{preset}"), 0),
            derive_seed(cfg.seed, &format!("train-{preset}"), 0),
        )?;
        println!("{preset:<9} best val accuracy {:.4} at epoch {}", t.outcome.best_val_accuracy, t.outcome.best_epoch);
        bases.push((preset.to_string(), t.checkpoint.as_base()?.clone()));
    }

    let tta = Some(&cfg.tta);
    let train = export_logits(&bases, &split.train, tta)?;
    let val = export_logits(&bases, &split.val, tta)?;
    let test = export_logits(&bases, &split.test, tta)?;
    if let Some(dir) = &out {
        for (name, set) in [("train", &train), ("val", &val), ("test", &test)] {
            write_logits(dir.join(format!("{name}.logits.jsonl")), set)?;
        }
    }

    let (head, outcome) = train_head(&train, &val, &cfg, derive_seed(cfg.seed, "init-head", 0), derive_seed(cfg.seed, "train-head", 0))?;
    println!("head      best val accuracy {:.4} at epoch {}", outcome.best_val_accuracy, outcome.best_epoch);
    if let Some(dir) = &out {
        head.save(dir.join("head.json"))?;
    }

    println!("\ntest split (TTA logits)");
    let fused = evaluate_head(&head, &test)?;
    println!("mase      accuracy {:.4}  auc {:.4}", fused.accuracy, fused.auc.unwrap_or(f64::NAN));
    for (name, r) in evaluate_columns(&test)? {
        println!("{name:<9} accuracy {:.4}  auc {:.4}", r.accuracy, r.auc.unwrap_or(f64::NAN));
    }
    println!("\n{}", fused.table());
    Ok(())
}
