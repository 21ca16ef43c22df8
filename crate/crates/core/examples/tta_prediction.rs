//! Test-time augmentation: base logits averaged over flips, rotations and
//! intensity changes, compared with a single plain pass.
//!
//! cargo run --release --example tta_prediction

use mase::autodiff::derive_seed;
use mase::cli::commands::{base_logits, gen_data, train_base};
use mase::cli::RunConfig;
use mase::data::{labels, TtaConfig};
use mase::eval::metrics_from_logits;
use mase::layers::TrunkPreset;

fn main() -> mase::Result<()> {
    let mut cfg = RunConfig::desk_scale();
    cfg.base.max_epochs = 8;
    let split = gen_data(&cfg, None)?;
    let trained = train_base(TrunkPreset::DenseToy, &split, &cfg, derive_seed(0, "init", 0), derive_seed(0, "train", 0))?;
    let model = trained.checkpoint.as_base()?;
    let y = labels(&split.test);

    println!("views: {:?}", cfg.tta.transforms);
    for (name, tta) in [("plain", TtaConfig::identity_only()), ("tta", cfg.tta.clone())] {
        let logits = base_logits(model, &split.test, Some(&tta))?;
        let r = metrics_from_logits(&logits, &y)?;
        println!(
            "{name:<6} {} views  accuracy {:.4}  auc {:.4}",
            tta.views(),
            r.accuracy,
            r.auc.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
