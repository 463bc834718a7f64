use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Condition, HarnessError};
use crate::engine::ExecutionTrace;

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const TRIALS_FILE: &str = "trials.jsonl";
pub const TRACES_FILE: &str = "traces.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialOutcome {
    Success,
    Failure { reason: String },
    Aborted,
    Preempted,
}

impl TrialOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, TrialOutcome::Success)
    }

    pub fn label(&self) -> &str {
        match self {
            TrialOutcome::Success => "success",
            TrialOutcome::Failure { .. } => "failure",
            TrialOutcome::Aborted => "aborted",
            TrialOutcome::Preempted => "preempted",
        }
    }
}

/// One executed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub schema_version: u32,
    pub trial_id: u64,
    pub condition: Condition,
    pub rep: u64,
    pub outcome: TrialOutcome,
    /// Wall-clock duration; 0 when timestamps are disabled.
    pub duration_s: f64,
    /// Binding slot to component id.
    pub components: BTreeMap<String, String>,
    pub seed: u64,
    /// `traces.jsonl#<trial_id>`.
    pub trace_ref: String,
    /// The world matched its nominal state after the reset stage.
    pub reset_verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub trial_id: u64,
    pub trace: ExecutionTrace,
}

/// Receives records as trials finish.
pub trait RecordSink {
    fn record(&mut self, record: &TrialRecord, trace: &ExecutionTrace) -> Result<(), HarnessError>;
}

/// Keeps everything in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<TrialRecord>,
    pub traces: Vec<ExecutionTrace>,
}

impl RecordSink for MemorySink {
    fn record(&mut self, record: &TrialRecord, trace: &ExecutionTrace) -> Result<(), HarnessError> {
        self.records.push(record.clone());
        self.traces.push(trace.clone());
        Ok(())
    }
}

struct Files {
    trials: BufWriter<File>,
    traces: BufWriter<File>,
}

/// Appends `trials.jsonl` and `traces.jsonl` in a directory, flushing after
/// every record so a crash loses at most the trial in progress.
pub struct JsonlSink {
    dir: PathBuf,
    files: Mutex<Files>,
}

impl JsonlSink {
    pub fn create(dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
        let open = |name: &str| {
            let p = dir.join(name);
            File::create(&p)
                .map(BufWriter::new)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))
        };
        Ok(JsonlSink {
            dir: dir.to_owned(),
            files: Mutex::new(Files {
                trials: open(TRIALS_FILE)?,
                traces: open(TRACES_FILE)?,
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends one record; callable from several threads.
    pub fn append(&self, record: &TrialRecord, trace: &ExecutionTrace) -> Result<(), HarnessError> {
        let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", self.dir.display()));
        let line = serde_json::to_string(record).expect("records serialize");
        let trace_line = serde_json::to_string(&TraceLine {
            trial_id: record.trial_id,
            trace: trace.clone(),
        })
        .expect("traces serialize");
        let mut f = self.files.lock().unwrap_or_else(|p| p.into_inner());
        writeln!(f.trials, "{line}").map_err(io)?;
        writeln!(f.traces, "{trace_line}").map_err(io)?;
        f.trials.flush().map_err(io)?;
        f.traces.flush().map_err(io)
    }
}

impl RecordSink for JsonlSink {
    fn record(&mut self, record: &TrialRecord, trace: &ExecutionTrace) -> Result<(), HarnessError> {
        self.append(record, trace)
    }
}

/// Parses a trial log; errors name the 1-based line.
pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let f = File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_records(BufReader::new(f))
}

pub fn parse_records(reader: impl BufRead) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| HarnessError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TrialRecord = serde_json::from_str(&line).map_err(|e| HarnessError::Log {
            line: i + 1,
            message: e.to_string(),
        })?;
        if r.schema_version != RECORD_SCHEMA_VERSION {
            return Err(HarnessError::Log {
                line: i + 1,
                message: format!("unsupported record schema_version {}", r.schema_version),
            });
        }
        out.push(r);
    }
    Ok(out)
}
