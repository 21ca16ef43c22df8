use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EarlyStopDecision {
    Continue { improved: bool },
    Stop,
}

/// Tracks the best validation accuracy; only strict improvements count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopState {
    pub patience: u64,
    pub best_accuracy: Option<f64>,
    pub best_epoch: Option<u64>,
    pub since_improvement: u64,
}

impl EarlyStopState {
    pub fn new(patience: u64) -> Self {
        EarlyStopState {
            patience,
            best_accuracy: None,
            best_epoch: None,
            since_improvement: 0,
        }
    }

    pub fn update(&mut self, val_accuracy: f64, epoch: u64) -> EarlyStopDecision {
        let improved = self.best_accuracy.is_none_or(|best| val_accuracy > best);
        if improved {
            self.best_accuracy = Some(val_accuracy);
            self.best_epoch = Some(epoch);
            self.since_improvement = 0;
            return EarlyStopDecision::Continue { improved: true };
        }
        self.since_improvement += 1;
        if self.since_improvement >= self.patience {
            EarlyStopDecision::Stop
        } else {
            EarlyStopDecision::Continue { improved: false }
        }
    }
}
