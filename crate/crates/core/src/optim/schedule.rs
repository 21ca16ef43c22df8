use serde::{Deserialize, Serialize};

/// Cosine annealing with warm restarts, stepped once per epoch.
///
/// Cycle `i` lasts `t0 · t_mult^i` epochs; within a cycle
/// `lr = min + ½(max − min)(1 + cos(π·t_cur/t_i))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosineRestartSchedule {
    pub max_lr: f64,
    pub min_lr: f64,
    pub t0: u64,
    pub t_mult: u64,
}

impl Default for CosineRestartSchedule {
    fn default() -> Self {
        CosineRestartSchedule {
            max_lr: 5e-4,
            min_lr: 1e-6,
            t0: 10,
            t_mult: 2,
        }
    }
}

impl CosineRestartSchedule {
    /// `(cycle length, position within cycle)` for `epoch`.
    pub fn locate(&self, epoch: u64) -> (u64, u64) {
        let mut t_i = self.t0.max(1);
        let mut t_cur = epoch;
        while t_cur >= t_i {
            t_cur -= t_i;
            t_i = t_i.saturating_mul(self.t_mult.max(1));
        }
        (t_i, t_cur)
    }

    pub fn lr(&self, epoch: u64) -> f64 {
        let (t_i, t_cur) = self.locate(epoch);
        let phase = std::f64::consts::PI * t_cur as f64 / t_i as f64;
        self.min_lr + 0.5 * (self.max_lr - self.min_lr) * (1.0 + phase.cos())
    }

    /// Epochs at which a new cycle starts (excluding epoch 0), up to `limit`.
    pub fn restart_epochs(&self, limit: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut t_i = self.t0.max(1);
        let mut at = t_i;
        while at <= limit {
            out.push(at);
            t_i = t_i.saturating_mul(self.t_mult.max(1));
            at = at.saturating_add(t_i);
        }
        out
    }
}
