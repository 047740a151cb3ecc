use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::policy::{best_epoch, should_stop, StopDecision, StopPolicy};
use super::{EpochMetrics, HarnessError, StopReason, TrainRunResult};

pub const STOP_FILE: &str = "STOP";
pub const CONFIG_FILE: &str = "config";
pub const HISTORY_FILE: &str = "history";
pub const RESULT_FILE: &str = "result";
pub const ARTIFACTS_DIR: &str = "artifacts";
pub const ADAPTER_LOG: &str = "adapter.log";

#[derive(Debug, Clone, PartialEq)]
pub enum AdapterEvent {
    Line(String),
    Exited { success: bool, code: Option<i32> },
}

/// Source of metrics records. Implemented by the external-process adapter
/// and by scripted streams used for replay and tests.
pub trait TrainerAdapter {
    /// Next stdout line or the process exit. `Ok(None)` means nothing
    /// arrived within `timeout`.
    fn next_event(&mut self, timeout: Option<Duration>) -> Result<Option<AdapterEvent>, HarnessError>;

    /// Asks the trainer to finish after its current epoch.
    fn request_stop(&mut self) -> Result<(), HarnessError>;

    /// Waits for the trainer to exit after a stop request, discarding any
    /// further records. Returns how many records were discarded.
    fn finish(&mut self) -> Result<usize, HarnessError>;

    /// Terminates the trainer immediately.
    fn abort(&mut self);
}

/// Replays a fixed list of stdout lines, then exits with `exit_success`.
#[derive(Debug, Clone)]
pub struct ScriptedAdapter {
    lines: VecDeque<String>,
    exit_success: bool,
    stopped: bool,
}

impl ScriptedAdapter {
    pub fn new<I, S>(lines: I, exit_success: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { lines: lines.into_iter().map(Into::into).collect(), exit_success, stopped: false }
    }

    pub fn from_history(history: &[EpochMetrics]) -> Self {
        Self::new(history.iter().map(EpochMetrics::to_line), true)
    }

    /// Stream of records with the given per-epoch mAP values and one
    /// second per epoch.
    pub fn from_map_values(values: &[f64]) -> Self {
        let history: Vec<EpochMetrics> =
            values.iter().enumerate().map(|(i, &m)| EpochMetrics::new(i as u32 + 1, m, 1.0)).collect();
        Self::from_history(&history)
    }
}

impl TrainerAdapter for ScriptedAdapter {
    fn next_event(&mut self, _timeout: Option<Duration>) -> Result<Option<AdapterEvent>, HarnessError> {
        if self.stopped {
            return Ok(Some(AdapterEvent::Exited { success: true, code: Some(0) }));
        }
        Ok(Some(match self.lines.pop_front() {
            Some(l) => AdapterEvent::Line(l),
            None => {
                AdapterEvent::Exited { success: self.exit_success, code: Some(if self.exit_success { 0 } else { 1 }) }
            }
        }))
    }

    fn request_stop(&mut self) -> Result<(), HarnessError> {
        self.stopped = true;
        Ok(())
    }

    fn finish(&mut self) -> Result<usize, HarnessError> {
        Ok(0)
    }

    fn abort(&mut self) {
        self.stopped = true;
    }
}

/// External trainer command. Arguments may contain `{run_dir}`,
/// `{stop_file}`, `{max_epochs}`, `{model}` and `{component}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl AdapterCommand {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { program: program.into(), args: args.into_iter().map(Into::into).collect() }
    }

    /// Splits a whitespace-separated command line. No shell quoting.
    pub fn parse(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace();
        let program = parts.next()?;
        Some(Self::new(program, parts))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_name: String,
    pub component_name: String,
    pub run_dir: PathBuf,
    #[serde(default)]
    pub policy: StopPolicy,
    /// Longest wait for the next record before giving up.
    #[serde(default)]
    pub epoch_timeout_secs: Option<f64>,
    /// Grace period after a stop request before the adapter is killed.
    #[serde(default = "default_grace")]
    pub stop_grace_secs: f64,
}

fn default_grace() -> f64 {
    600.0
}

impl RunConfig {
    pub fn new(model: impl Into<String>, component: impl Into<String>, run_dir: impl Into<PathBuf>) -> Self {
        Self {
            model_name: model.into(),
            component_name: component.into(),
            run_dir: run_dir.into(),
            policy: StopPolicy::default(),
            epoch_timeout_secs: None,
            stop_grace_secs: default_grace(),
        }
    }

    pub fn stop_file(&self) -> PathBuf {
        self.run_dir.join(STOP_FILE)
    }
}

enum Pipe {
    Line(String),
    Eof,
    Error(std::io::Error),
}

/// Adapter running as a child process; records are read from its stdout.
pub struct ProcessAdapter {
    child: Child,
    lines: Receiver<Pipe>,
    stop_file: PathBuf,
    grace: Duration,
    eof: bool,
}

impl ProcessAdapter {
    pub fn spawn(cmd: &AdapterCommand, config: &RunConfig) -> Result<Self, HarnessError> {
        let stop_file = config.stop_file();
        let subst = |a: &str| {
            a.replace("{run_dir}", &config.run_dir.display().to_string())
                .replace("{stop_file}", &stop_file.display().to_string())
                .replace("{max_epochs}", &config.policy.max_epochs.to_string())
                .replace("{model}", &config.model_name)
                .replace("{component}", &config.component_name)
        };
        let log_path = config.run_dir.join(ADAPTER_LOG);
        let log = File::create(&log_path).map_err(|e| HarnessError::io(&log_path, e))?;
        let mut child = Command::new(subst(&cmd.program))
            .args(cmd.args.iter().map(|a| subst(a)))
            .env("GRIDSIGHT_RUN_DIR", &config.run_dir)
            .env("GRIDSIGHT_STOP_FILE", &stop_file)
            .env("GRIDSIGHT_MAX_EPOCHS", config.policy.max_epochs.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::from(log))
            .spawn()
            .map_err(|e| HarnessError::Spawn(format!("{}: {e}", cmd.program)))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let msg = match line {
                    Ok(l) => Pipe::Line(l),
                    Err(e) => Pipe::Error(e),
                };
                let failed = matches!(msg, Pipe::Error(_));
                if tx.send(msg).is_err() || failed {
                    return;
                }
            }
            let _ = tx.send(Pipe::Eof);
        });
        Ok(Self {
            child,
            lines: rx,
            stop_file,
            grace: Duration::from_secs_f64(config.stop_grace_secs.max(0.0)),
            eof: false,
        })
    }

    fn exit_event(&mut self) -> Result<AdapterEvent, HarnessError> {
        let status = self.child.wait().map_err(|e| HarnessError::Spawn(e.to_string()))?;
        Ok(AdapterEvent::Exited { success: status.success(), code: status.code() })
    }
}

impl TrainerAdapter for ProcessAdapter {
    fn next_event(&mut self, timeout: Option<Duration>) -> Result<Option<AdapterEvent>, HarnessError> {
        if self.eof {
            return self.exit_event().map(Some);
        }
        let msg = match timeout {
            Some(t) => match self.lines.recv_timeout(t) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => return Ok(None),
                Err(RecvTimeoutError::Disconnected) => Pipe::Eof,
            },
            None => self.lines.recv().unwrap_or(Pipe::Eof),
        };
        match msg {
            Pipe::Line(l) => Ok(Some(AdapterEvent::Line(l))),
            Pipe::Eof => {
                self.eof = true;
                self.exit_event().map(Some)
            }
            Pipe::Error(e) => Err(HarnessError::ProtocolViolation {
                detail: format!("reading adapter output: {e}"),
                history: Vec::new(),
            }),
        }
    }

    fn request_stop(&mut self) -> Result<(), HarnessError> {
        File::create(&self.stop_file).map_err(|e| HarnessError::io(&self.stop_file, e))?;
        Ok(())
    }

    fn finish(&mut self) -> Result<usize, HarnessError> {
        let deadline = Instant::now() + self.grace;
        let mut discarded = 0;
        while !self.eof {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(Pipe::Line(l)) if !l.trim().is_empty() => discarded += 1,
                Ok(Pipe::Line(_)) => {}
                Ok(Pipe::Eof | Pipe::Error(_)) | Err(RecvTimeoutError::Disconnected) => self.eof = true,
                Err(RecvTimeoutError::Timeout) => {
                    warn!("adapter ignored the stop request for {:?}; killing it", self.grace);
                    self.abort();
                    break;
                }
            }
        }
        let _ = self.child.wait();
        Ok(discarded)
    }

    fn abort(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.eof = true;
    }
}

impl Drop for ProcessAdapter {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// Optional sink for the append-only history log.
pub struct HistoryLog {
    file: File,
}

impl HistoryLog {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)
            .map_err(|e| HarnessError::io(path, e))?;
        Ok(Self { file })
    }

    fn append(&mut self, m: &EpochMetrics) -> Result<(), HarnessError> {
        writeln!(self.file, "{}", m.to_line())
            .and_then(|_| self.file.flush())
            .map_err(|e| HarnessError::Io(format!("history: {e}")))
    }
}

fn parse_record(line: &str, history: &[EpochMetrics]) -> Result<EpochMetrics, String> {
    let m: EpochMetrics = serde_json::from_str(line).map_err(|e| format!("unparseable record `{line}`: {e}"))?;
    if m.epoch < 1 {
        return Err(format!("epoch {} must be >= 1", m.epoch));
    }
    if let Some(prev) = history.last() {
        if m.epoch <= prev.epoch {
            return Err(format!("epoch {} does not follow epoch {}", m.epoch, prev.epoch));
        }
    }
    if !(0.0..=1.0).contains(&m.map50) {
        return Err(format!("map50 {} outside [0, 1]", m.map50));
    }
    if !(m.seconds >= 0.0) {
        return Err(format!("seconds {} must be >= 0", m.seconds));
    }
    Ok(m)
}

/// Consumes records from `adapter`, applying `policy` after every epoch.
/// On a stop decision the adapter is asked to stop and drained.
pub fn supervise(
    adapter: &mut dyn TrainerAdapter,
    config: &RunConfig,
    mut log: Option<&mut HistoryLog>,
) -> Result<TrainRunResult, HarnessError> {
    config.policy.validate().map_err(HarnessError::Config)?;
    let timeout = config.epoch_timeout_secs.map(Duration::from_secs_f64);
    let mut history: Vec<EpochMetrics> = Vec::new();

    let stop_reason = loop {
        let event = match adapter.next_event(timeout) {
            Ok(Some(ev)) => ev,
            Ok(None) => {
                adapter.abort();
                return Err(HarnessError::Timeout { seconds: config.epoch_timeout_secs.unwrap_or_default(), history });
            }
            Err(HarnessError::ProtocolViolation { detail, .. }) => {
                adapter.abort();
                return Err(HarnessError::ProtocolViolation { detail, history });
            }
            Err(e) => {
                adapter.abort();
                return Err(e);
            }
        };
        match event {
            AdapterEvent::Line(line) if line.trim().is_empty() => continue,
            AdapterEvent::Line(line) => {
                let m = match parse_record(line.trim(), &history) {
                    Ok(m) => m,
                    Err(detail) => {
                        adapter.abort();
                        return Err(HarnessError::ProtocolViolation { detail, history });
                    }
                };
                debug!("epoch {} map50 {:.4}", m.epoch, m.map50);
                if let Some(log) = log.as_deref_mut() {
                    log.append(&m)?;
                }
                history.push(m);
                match should_stop(&history, &config.policy) {
                    StopDecision::Continue => {}
                    decision => {
                        adapter.request_stop()?;
                        let discarded = adapter.finish()?;
                        if discarded > 0 {
                            info!("discarded {discarded} record(s) emitted after the stop request");
                        }
                        break if decision == StopDecision::StopMax {
                            StopReason::MaxEpochs
                        } else {
                            StopReason::Patience
                        };
                    }
                }
            }
            AdapterEvent::Exited { success: true, .. } => {
                if history.is_empty() {
                    return Err(HarnessError::ProtocolViolation {
                        detail: "adapter exited without emitting any record".into(),
                        history,
                    });
                }
                break StopReason::TrainerExit;
            }
            AdapterEvent::Exited { success: false, code } => {
                return Err(HarnessError::AdapterCrashed { code, history });
            }
        }
    };

    Ok(TrainRunResult::from_history(config, &history, stop_reason, None))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Launches the adapter in `config.run_dir` and supervises it.
///
/// The run directory receives `config`, `history` (one JSON record per
/// line), `result`, and an `artifacts/` directory owned by the adapter.
pub fn run_training(cmd: &AdapterCommand, config: &RunConfig) -> Result<TrainRunResult, HarnessError> {
    let dir = &config.run_dir;
    fs::create_dir_all(dir.join(ARTIFACTS_DIR)).map_err(|e| HarnessError::io(dir, e))?;
    let stop = config.stop_file();
    if stop.exists() {
        fs::remove_file(&stop).map_err(|e| HarnessError::io(&stop, e))?;
    }
    #[derive(Serialize)]
    struct Persisted<'a> {
        adapter: &'a AdapterCommand,
        #[serde(flatten)]
        run: &'a RunConfig,
    }
    write_json(&dir.join(CONFIG_FILE), &Persisted { adapter: cmd, run: config })?;
    let mut log = HistoryLog::create(&dir.join(HISTORY_FILE))?;

    let started = Instant::now();
    let outcome = ProcessAdapter::spawn(cmd, config).and_then(|mut a| supervise(&mut a, config, Some(&mut log)));
    let wall = started.elapsed().as_secs_f64();

    match outcome {
        Ok(mut result) => {
            result.wall_seconds = Some(wall);
            write_json(&dir.join(RESULT_FILE), &result)?;
            Ok(result)
        }
        Err(err) => {
            let history = err.history().to_vec();
            let mut failed = TrainRunResult::from_history(config, &history, StopReason::Error, Some(err.to_string()));
            failed.wall_seconds = Some(wall);
            write_json(&dir.join(RESULT_FILE), &failed)?;
            Err(err)
        }
    }
}

/// Reads a `history` file written by [`run_training`].
pub fn read_history(path: &Path) -> Result<Vec<EpochMetrics>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out: Vec<EpochMetrics> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let m = parse_record(line, &out)
            .map_err(|detail| HarnessError::ProtocolViolation { detail, history: out.clone() })?;
        out.push(m);
    }
    Ok(out)
}

/// Re-runs the stop policy over a recorded stream.
pub fn replay(history: &[EpochMetrics], config: &RunConfig) -> Result<TrainRunResult, HarnessError> {
    supervise(&mut ScriptedAdapter::from_history(history), config, None)
}

pub(crate) fn summarize_history(history: &[EpochMetrics], policy: &StopPolicy) -> (f64, u32, u32, f64) {
    let best = best_epoch(history, policy.min_delta);
    (
        best.map_or(0.0, |b| b.map50),
        best.map_or(0, |b| b.epoch),
        history.last().map_or(0, |m| m.epoch),
        history.iter().map(|m| m.seconds).sum(),
    )
}
