//! Hierarchical state-machine engine.
//!
//! A [`BehaviorDef`] is a set of states with named outcomes and a transition
//! table keyed on `(state, outcome)`. States call services, run built-in
//! compute functions, or nest another behavior. Data flows through a
//! [`Userdata`] blackboard; each state may read only its `input_keys` and
//! write only its `output_keys`.
//!
//! Three outcome labels have engine meaning: `succeeded`, `aborted` and
//! `preempted`. Labels starting with `__` and the empty label are reserved.

mod behavior;
mod compute;
mod exec;
mod userdata;
mod validate;

pub use behavior::{
    BehaviorDef, BehaviorDocument, StateDef, StateDocument, StateKind, Transition, ABORTED,
    BEHAVIOR_SCHEMA_VERSION, PREEMPTED, SUCCEEDED,
};
pub use compute::{ComputeFn, ComputeRegistry};
pub use exec::{
    ExecOptions, Execution, ExecutionTrace, Executor, PreemptHandle, ServiceError, ServiceInvoker,
    ServiceOutput, ServiceRequest, TraceEntry, DEFAULT_MAX_STEPS,
};
pub use userdata::{KeyError, StateContext, Userdata};
pub use validate::{validate_behavior, BehaviorLibrary, Finding, FindingKind};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("cannot load behavior: {0}")]
    Load(String),
    #[error("behavior `{0}` is already registered")]
    DuplicateBehavior(String),
    #[error("unknown behavior `{0}`")]
    UnknownBehavior(String),
}

/// True for outcome labels the engine reserves for itself.
pub fn is_reserved_label(label: &str) -> bool {
    label.is_empty() || label.starts_with("__")
}
