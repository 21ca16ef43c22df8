//! Paired Wilcoxon signed-rank tests with a Bonferroni threshold, on
//! per-seed accuracies of an ensemble and three baselines.
//!
//! cargo run --example significance

use indexmap::IndexMap;
use mase::autodiff::RngState;
use mase::cli::commands::{significance, PairedRecord};
use mase::eval::{wilcoxon_with, PValueMethod};

fn main() -> mase::Result<()> {
    let small = wilcoxon_with(&[0.01, 0.02, 0.03, 0.04, 0.05], 0.05, PValueMethod::Exact)?;
    println!("five positive differences: W+ = {}, exact p = {}", small.w_plus, small.p_value);

    let mut rng = RngState::new(9);
    let records: Vec<PairedRecord> = (0..20)
        .map(|seed_index| {
            let base = 0.95 + rng.normal(0.0, 0.005);
            let accuracy: IndexMap<String, f64> = [
                ("mase", base + 0.006),
                ("densetoy", base + rng.normal(0.0, 0.004)),
                ("efftoy", base - 0.03 + rng.normal(0.0, 0.01)),
                ("vittoy", base + 0.004 + rng.normal(0.0, 0.004)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            PairedRecord { seed_index, accuracy }
        })
        .collect();
    let report = significance(&records, "mase", 0.05, None, false)?;
    println!("\n{}", report.table());
    Ok(())
}
