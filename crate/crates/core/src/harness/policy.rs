use serde::{Deserialize, Serialize};

use super::EpochMetrics;

pub const DEFAULT_MAX_EPOCHS: u32 = 100;
pub const DEFAULT_PATIENCE: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopPolicy {
    pub max_epochs: u32,
    pub patience: u32,
    /// An epoch improves on the best only if its mAP exceeds it by more
    /// than this.
    pub min_delta: f64,
}

impl Default for StopPolicy {
    fn default() -> Self {
        Self { max_epochs: DEFAULT_MAX_EPOCHS, patience: DEFAULT_PATIENCE, min_delta: 0.0 }
    }
}

impl StopPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_epochs < 1 {
            return Err("max_epochs must be at least 1".into());
        }
        if self.patience < 1 {
            return Err("patience must be at least 1".into());
        }
        if !(self.min_delta >= 0.0) {
            return Err(format!("min_delta must be >= 0, got {}", self.min_delta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopDecision {
    Continue,
    StopPatience,
    StopMax,
}

/// Best epoch under the policy's improvement rule: the first epoch whose
/// mAP beats every earlier best by more than `min_delta`.
pub fn best_epoch(history: &[EpochMetrics], min_delta: f64) -> Option<&EpochMetrics> {
    let mut best: Option<&EpochMetrics> = None;
    for m in history {
        if best.is_none_or(|b| m.map50 > b.map50 + min_delta) {
            best = Some(m);
        }
    }
    best
}

pub fn should_stop(history: &[EpochMetrics], policy: &StopPolicy) -> StopDecision {
    let Some(last) = history.last() else {
        return StopDecision::Continue;
    };
    if last.epoch >= policy.max_epochs {
        return StopDecision::StopMax;
    }
    let best = best_epoch(history, policy.min_delta).expect("history is nonempty");
    if last.epoch - best.epoch >= policy.patience {
        StopDecision::StopPatience
    } else {
        StopDecision::Continue
    }
}
