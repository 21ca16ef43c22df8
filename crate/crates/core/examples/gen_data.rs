//! Generates the synthetic nodule-like patches and writes the three splits.
//!
//! cargo run --example gen_data -- [out-dir]

use mase::cli::commands::{format_counts, gen_data};
use mase::cli::RunConfig;

fn main() -> mase::Result<()> {
    let out = std::env::args().nth(1);
    let cfg = RunConfig::default();
    let split = gen_data(&cfg, out.as_deref().map(std::path::Path::new))?;
    print!("{}", format_counts(&split));

    let first = &split.train[0];
    println!("\nfirst train patch {} (label {}):", first.id, first.label);
    for r in 0..first.patch.height {
        let row: String = (0..first.patch.width)
            .map(|c| match first.patch.get(r, c) {
                v if v > 0.66 => '#',
                v if v > 0.33 => '+',
                _ => '.',
            })
            .collect();
        println!("  {row}");
    }
    if let Some(dir) = out {
        println!("\nwrote {dir}/{{train,val,test}}.jsonl");
    }
    Ok(())
}
