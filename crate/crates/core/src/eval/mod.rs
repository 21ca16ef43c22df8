//! Classification metrics, ROC analysis and paired significance tests.

mod metrics;
mod wilcoxon;

pub use metrics::{
    argmax_rows, auc, confusion, mean_std, metrics, metrics_from_logits, positive_probabilities, roc_curve,
    ClassMetrics, ConfusionMatrix, MetricsReport, DEFAULT_THRESHOLD,
};
pub use wilcoxon::{
    bonferroni, signed_ranks, wilcoxon_signed_rank, wilcoxon_with, BonferroniResult, PValueMethod, WilcoxonResult,
    EXACT_LIMIT,
};
