//! Saving and reloading a trained head, plus the TOML override format that
//! every command accepts through `--config`.
//!
//! cargo run --release --example checkpoints

use mase::cli::commands::{evaluate_head, train_head};
use mase::cli::{Checkpoint, RunConfig};
use mase::data::{complementary_logits, ComplementaryConfig};

fn main() -> mase::Result<()> {
    let cfg = RunConfig::from_toml("seed = 3\n[head]\nmax_epochs = 15\n")?;
    println!("resolved head config: {:?}\n", cfg.head);

    let [train, val, test] = complementary_logits(&ComplementaryConfig::default())?;
    let (ck, _) = train_head(&train, &val, &cfg, 1, 2)?;
    let dir = std::env::temp_dir().join("mase-checkpoint-example");
    let path = dir.join("head.json");
    ck.save(&path)?;

    let loaded = Checkpoint::load(&path)?;
    let (before, after) = (evaluate_head(&ck, &test)?, evaluate_head(&loaded, &test)?);
    println!("saved to {}", path.display());
    println!("accuracy before {:.4}, after reload {:.4}", before.accuracy, after.accuracy);
    println!("metrics identical: {}", before == after);
    println!("parameters identical: {}", ck == loaded);
    Ok(())
}
