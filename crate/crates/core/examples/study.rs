//! The multi-seed experiment: one synthetic dataset, then for each seed
//! three bases, the attention head and TTA evaluation, followed by paired
//! significance tests of the ensemble against every base.
//!
//! cargo run --release --example study -- [seeds] [out-dir]

use std::path::PathBuf;

use mase::cli::{run_study, RunConfig};

fn main() -> mase::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = RunConfig::desk_scale();
    cfg.study.seeds = args.next().map_or(4, |s| s.parse().expect("seeds is a number"));
    let out = args.next().map(PathBuf::from);

    let outcome = run_study(&cfg, out.as_deref())?;
    for r in &outcome.records {
        let accs: Vec<String> = r.accuracy.iter().map(|(m, a)| format!("{m} {a:.4}")).collect();
        println!("seed {:>2}: {}", r.seed_index, accs.join(", "));
    }
    println!("\n{}", outcome.summary.table());
    Ok(())
}
