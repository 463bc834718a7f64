//! Factorial benchmark harness: protocol expansion, trial execution with a
//! verified reset between trials, JSONL trial logs and comparison reports.

mod protocol;
mod record;
mod report;
mod runner;

pub use protocol::{
    describe, plan_trials, splitmix64, trial_seed, CombinationCount, Condition, PlannedTrial,
    ProtocolDef, SeedPolicy, PROTOCOL_SCHEMA_VERSION,
};
pub use record::{
    parse_records, read_records, JsonlSink, MemorySink, RecordSink, TraceLine, TrialOutcome,
    TrialRecord, RECORD_SCHEMA_VERSION, TRACES_FILE, TRIALS_FILE,
};
pub use report::{compare, ComparisonReport, GroupRow, Tally};
pub use runner::{
    Bench, RunOptions, APPARATUS_SLOT, GRASP_PLANNER_SLOT, MOTION_PLANNER_SLOT, PERCEPTION_SLOT,
    RESET_FAILED, RESET_FAILURE, ROBOT_SLOT, TRIAL_BEHAVIOR, VERIFY_RESET,
};

use thiserror::Error;

use crate::bus::BusError;
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid protocol: {0}")]
    Protocol(String),
    #[error("{0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("behavior error: {0}")]
    Behavior(String),
    #[error("invalid condition: {0}")]
    Condition(String),
    #[error("world error: {0}")]
    Sim(#[from] SimError),
    #[error("registry error: {0}")]
    Bus(#[from] BusError),
    #[error("trial {trial_id}: world reset failed ({detail}); stopping because fail-fast is set")]
    ResetFailed { trial_id: u64, detail: String },
    #[error("cannot report: {0}")]
    Report(String),
}
