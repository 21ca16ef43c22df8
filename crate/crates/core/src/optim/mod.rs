//! AdamW, cosine annealing with warm restarts, early stopping, gradient
//! accumulation and the generic training loop.

mod adamw;
mod early_stop;
mod schedule;
mod trainer;

pub use adamw::{AdamWConfig, AdamWState};
pub use early_stop::{EarlyStopDecision, EarlyStopState};
pub use schedule::CosineRestartSchedule;
pub use trainer::{
    accumulate_and_step, microbatch_gradients, train_model, EpochRecord, Examples, RowAugment, TrainConfig,
    TrainOutcome,
};
