//! Supervised training runs with early stopping, and comparison tables
//! over finished runs.
//!
//! # Adapter protocol
//!
//! The trainer is an external process. After each epoch it writes one JSON
//! object on a single stdout line:
//!
//! ```text
//! {"epoch": 3, "map50": 0.412, "ap_per_class": {"transformer": 0.41}, "seconds": 37.5}
//! ```
//!
//! Unknown fields are ignored. When the harness decides to stop it creates
//! a file named `STOP` in the run directory (also exported to the adapter
//! as `GRIDSIGHT_STOP_FILE`); the adapter checks for it at each epoch
//! boundary and exits with status 0.

mod policy;
mod report;
mod runner;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use policy::{best_epoch, should_stop, StopDecision, StopPolicy, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE};
pub use report::{compare, ComparisonCell, ComparisonReport, ComponentSummary, ModelSummary};
pub use runner::{
    read_history, replay, run_training, supervise, AdapterCommand, AdapterEvent, HistoryLog, ProcessAdapter, RunConfig,
    ScriptedAdapter, TrainerAdapter, ADAPTER_LOG, ARTIFACTS_DIR, CONFIG_FILE, HISTORY_FILE, RESULT_FILE, STOP_FILE,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("adapter exited with status {code:?} before a stop decision ({} epochs recorded)", history.len())]
    AdapterCrashed { code: Option<i32>, history: Vec<EpochMetrics> },
    #[error("protocol violation after {} epochs: {detail}", history.len())]
    ProtocolViolation { detail: String, history: Vec<EpochMetrics> },
    #[error("no record within {seconds} s ({} epochs recorded)", history.len())]
    Timeout { seconds: f64, history: Vec<EpochMetrics> },
    #[error("failed to start adapter: {0}")]
    Spawn(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("duplicate result for model `{model}`, component `{component}`")]
    DuplicateCell { model: String, component: String },
    #[error("no results to compare")]
    NoResults,
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    /// Records received before the failure, when the error carries them.
    pub fn history(&self) -> &[EpochMetrics] {
        match self {
            Self::AdapterCrashed { history, .. }
            | Self::ProtocolViolation { history, .. }
            | Self::Timeout { history, .. } => history,
            _ => &[],
        }
    }
}

/// One metrics record from the adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub map50: f64,
    #[serde(default)]
    pub ap_per_class: BTreeMap<String, f64>,
    pub seconds: f64,
}

impl EpochMetrics {
    pub fn new(epoch: u32, map50: f64, seconds: f64) -> Self {
        Self { epoch, map50, ap_per_class: BTreeMap::new(), seconds }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    TrainerExit,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunResult {
    pub model_name: String,
    pub component_name: String,
    pub best_map50: f64,
    pub best_epoch: u32,
    pub last_epoch: u32,
    /// Sum of adapter-reported epoch seconds.
    pub total_seconds: f64,
    /// Adapter process lifetime measured by the harness; absent for
    /// replays.
    #[serde(default)]
    pub wall_seconds: Option<f64>,
    pub stop_reason: StopReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub history: Vec<EpochMetrics>,
}

impl TrainRunResult {
    pub(crate) fn from_history(
        config: &RunConfig,
        history: &[EpochMetrics],
        stop_reason: StopReason,
        error: Option<String>,
    ) -> Self {
        let (best_map50, best_epoch, last_epoch, total_seconds) = runner::summarize_history(history, &config.policy);
        Self {
            model_name: config.model_name.clone(),
            component_name: config.component_name.clone(),
            best_map50,
            best_epoch,
            last_epoch,
            total_seconds,
            wall_seconds: None,
            stop_reason,
            error,
            history: history.to_vec(),
        }
    }

    /// Result with the harness-measured wall time removed, for comparing
    /// runs of the same stream.
    pub fn without_wall_clock(&self) -> Self {
        Self { wall_seconds: None, ..self.clone() }
    }

    /// Minimal result for report fixtures and imported numbers.
    pub fn summary(model: &str, component: &str, best_map50: f64, total_seconds: f64) -> Self {
        Self {
            model_name: model.into(),
            component_name: component.into(),
            best_map50,
            best_epoch: 0,
            last_epoch: 0,
            total_seconds,
            wall_seconds: None,
            stop_reason: StopReason::TrainerExit,
            error: None,
            history: Vec::new(),
        }
    }
}
