//! Central-difference gradient checks of every layer, both losses and the
//! full fusion head.
//!
//! cargo run --release --example gradcheck -- [seed]

use mase::cli::{format_gradcheck, gradcheck_suite};

fn main() -> mase::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed is a number"));
    let entries = gradcheck_suite(seed)?;
    print!("{}", format_gradcheck(&entries));
    let failed = entries.iter().filter(|e| !e.passed).count();
    println!("{} of {} components pass", entries.len() - failed, entries.len());
    Ok(())
}
