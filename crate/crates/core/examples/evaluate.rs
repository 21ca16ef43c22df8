//! Evaluation metrics from scores: confusion matrix, per-class precision,
//! recall and F1, AUC, and the ROC curve.
//!
//! cargo run --example evaluate

use mase::autodiff::RngState;
use mase::eval::{auc, metrics, roc_curve, DEFAULT_THRESHOLD};

fn main() -> mase::Result<()> {
    // a noisy scorer on a 5:1 imbalanced set
    let mut rng = RngState::new(4);
    let labels: Vec<usize> = (0..600).map(|i| usize::from(i % 6 == 0)).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&y| (rng.normal(if y == 1 { 1.2 } else { -1.2 }, 1.0) / 2.0).tanh() / 2.0 + 0.5)
        .collect();

    let report = metrics(&scores, &labels, DEFAULT_THRESHOLD)?;
    println!("{}", report.table());
    println!("{}", report.to_json_line());

    println!("\nAUC {:.4}", auc(&scores, &labels)?);
    let roc = roc_curve(&scores, &labels)?;
    println!("ROC has {} points; every 100th:", roc.len());
    for (fpr, tpr) in roc.iter().step_by(100) {
        println!("  fpr {fpr:.3}  tpr {tpr:.3}");
    }

    match auc(&scores, &vec![0; scores.len()]) {
        Err(e) => println!("\nsingle-class AUC: {e}"),
        Ok(a) => println!("\nunexpected AUC {a}"),
    }
    Ok(())
}
