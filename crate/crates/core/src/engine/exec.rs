use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use super::{
    BehaviorDef, BehaviorLibrary, ComputeRegistry, StateContext, StateDef, StateKind, Userdata,
    ABORTED, PREEMPTED,
};
use crate::types::Value;

pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Cross-thread stop signal for one execution.
///
/// Triggering is idempotent and safe from any thread. The engine checks it
/// at every state boundary; service transports may also poll it to cancel
/// an in-flight call.
#[derive(Debug, Clone, Default)]
pub struct PreemptHandle(Arc<AtomicBool>);

impl PreemptHandle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Requests preemption. Always acknowledged; repeated calls are no-ops.
    pub fn preempt(&self) -> bool {
        self.0.store(true, Ordering::SeqCst);
        true
    }

    pub fn is_preempted(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// Everything a service-backed state hands to its invoker.
#[derive(Debug)]
pub struct ServiceRequest<'a> {
    pub state: &'a str,
    pub kind: StateKind,
    /// Binding slot named by the state.
    pub slot: &'a str,
    pub operation: Option<&'a str>,
    /// Declared inputs that are currently set, keyed by userdata key.
    pub inputs: BTreeMap<String, Value>,
    pub output_keys: &'a [String],
    /// State configuration with parameter references resolved.
    pub config: &'a BTreeMap<String, Json>,
    pub cancel: &'a PreemptHandle,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceOutput {
    /// Outcome chosen by the service; `None` means `succeeded`.
    pub outcome: Option<String>,
    /// Values to write, keyed by userdata key.
    pub values: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    #[error("no component bound to slot `{0}`")]
    Unbound(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("service failed: {0}")]
    Failed(String),
    #[error("cancelled")]
    Cancelled,
}

impl ServiceError {
    /// Infrastructure errors abort the execution even when the state maps a
    /// failure outcome.
    pub fn is_fatal(&self) -> bool {
        matches!(self, ServiceError::Unbound(_) | ServiceError::Transport(_))
    }
}

/// Resolves and performs service and action calls on behalf of states.
pub trait ServiceInvoker {
    fn call(&self, request: &ServiceRequest<'_>) -> Result<ServiceOutput, ServiceError>;
}

/// An invoker with nothing bound.
impl ServiceInvoker for () {
    fn call(&self, request: &ServiceRequest<'_>) -> Result<ServiceOutput, ServiceError> {
        Err(ServiceError::Unbound(request.slot.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    /// Leaf states executed across all nesting levels before the run aborts.
    pub max_steps: usize,
    /// When false every trace timestamp is zero, for byte-stable logs.
    pub timestamps: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            max_steps: DEFAULT_MAX_STEPS,
            timestamps: true,
        }
    }
}

/// One executed leaf state. Nested states use `outer/inner` paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub state: String,
    pub outcome: String,
    pub start_s: f64,
    pub end_s: f64,
    pub keys_written: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub behavior: String,
    pub entries: Vec<TraceEntry>,
    pub outcome: String,
}

impl ExecutionTrace {
    pub fn states(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.state.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copy with every timestamp zeroed.
    pub fn without_timestamps(&self) -> ExecutionTrace {
        let mut t = self.clone();
        for e in &mut t.entries {
            e.start_s = 0.0;
            e.end_s = 0.0;
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    /// A terminal outcome of the behavior, `aborted` or `preempted`.
    pub outcome: String,
    pub userdata: Userdata,
    pub trace: ExecutionTrace,
    pub diagnostics: Vec<String>,
}

/// Runs behaviors against a library, service bindings and compute functions.
pub struct Executor<'a> {
    library: &'a BehaviorLibrary,
    services: &'a dyn ServiceInvoker,
    compute: &'a ComputeRegistry,
    overrides: BTreeMap<String, Json>,
    options: ExecOptions,
}

enum Flow {
    Terminal(String),
    Aborted,
    Preempted,
}

struct Run<'p> {
    started: Instant,
    steps: usize,
    entries: Vec<TraceEntry>,
    diagnostics: Vec<String>,
    preempt: &'p PreemptHandle,
}

struct Failure {
    message: String,
    fatal: bool,
}

impl Failure {
    fn soft(message: impl Into<String>) -> Self {
        Failure {
            message: message.into(),
            fatal: false,
        }
    }
    fn fatal(message: impl Into<String>) -> Self {
        Failure {
            message: message.into(),
            fatal: true,
        }
    }
}

const MAX_NESTING: usize = 64;

impl<'a> Executor<'a> {
    pub fn new(
        library: &'a BehaviorLibrary,
        services: &'a dyn ServiceInvoker,
        compute: &'a ComputeRegistry,
    ) -> Self {
        Executor {
            library,
            services,
            compute,
            overrides: BTreeMap::new(),
            options: ExecOptions::default(),
        }
    }

    /// Per-run parameter values; these take precedence over behavior defaults.
    pub fn parameters(mut self, overrides: BTreeMap<String, Json>) -> Self {
        self.overrides = overrides;
        self
    }

    pub fn options(mut self, options: ExecOptions) -> Self {
        self.options = options;
        self
    }

    /// Executes the registered behavior `name`.
    pub fn execute(&self, name: &str, userdata: Userdata, preempt: &PreemptHandle) -> Execution {
        match self.library.get(name) {
            Some(def) => self.execute_def(def, userdata, preempt),
            None => Execution {
                outcome: ABORTED.to_owned(),
                userdata,
                trace: ExecutionTrace {
                    behavior: name.to_owned(),
                    entries: Vec::new(),
                    outcome: ABORTED.to_owned(),
                },
                diagnostics: vec![format!("unknown behavior `{name}`")],
            },
        }
    }

    /// Executes `def`, resolving its `behavior_ref` states in the library.
    ///
    /// A behavior that fails validation is not started: the run aborts with
    /// one diagnostic per finding.
    pub fn execute_def(
        &self,
        def: &BehaviorDef,
        mut userdata: Userdata,
        preempt: &PreemptHandle,
    ) -> Execution {
        let mut run = Run {
            started: Instant::now(),
            steps: 0,
            entries: Vec::new(),
            diagnostics: Vec::new(),
            preempt,
        };
        let findings = self.library.validate_tree(def);
        let flow = if findings.is_empty() {
            self.run_behavior(
                &mut run,
                def,
                "",
                &mut userdata,
                &mut vec![&def.parameters],
                0,
            )
        } else {
            run.diagnostics
                .extend(findings.iter().map(|f| format!("invalid behavior: {f}")));
            Flow::Aborted
        };
        let outcome = match flow {
            Flow::Terminal(o) => o,
            Flow::Aborted => ABORTED.to_owned(),
            Flow::Preempted => PREEMPTED.to_owned(),
        };
        Execution {
            outcome: outcome.clone(),
            userdata,
            trace: ExecutionTrace {
                behavior: def.name.clone(),
                entries: run.entries,
                outcome,
            },
            diagnostics: run.diagnostics,
        }
    }

    fn elapsed(&self, run: &Run<'_>) -> f64 {
        if self.options.timestamps {
            run.started.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn run_behavior<'d>(
        &self,
        run: &mut Run<'_>,
        def: &'d BehaviorDef,
        prefix: &str,
        ud: &mut Userdata,
        defaults: &mut Vec<&'d BTreeMap<String, Json>>,
        depth: usize,
    ) -> Flow
    where
        'a: 'd,
    {
        let mut current = def.initial.as_str();
        loop {
            if run.preempt.is_preempted() {
                return Flow::Preempted;
            }
            let Some(state) = def.find_state(current) else {
                run.diagnostics.push(format!(
                    "{prefix}{current}: no such state in `{}`",
                    def.name
                ));
                return Flow::Aborted;
            };
            let path = format!("{prefix}{}", state.name);
            let outcome = if state.kind == StateKind::BehaviorRef {
                match self.run_nested(run, state, &path, ud, defaults, depth) {
                    Flow::Terminal(o) => o,
                    Flow::Preempted => return Flow::Preempted,
                    Flow::Aborted => match &state.error_outcome {
                        Some(e) => e.clone(),
                        None => return Flow::Aborted,
                    },
                }
            } else {
                match self.run_leaf(run, def, state, &path, ud, defaults) {
                    Flow::Terminal(o) => o,
                    other => return other,
                }
            };
            let Some(target) = def.target(&state.name, &outcome) else {
                run.diagnostics
                    .push(format!("{path}: no transition for outcome `{outcome}`"));
                return Flow::Aborted;
            };
            if def.find_state(target).is_some() {
                current = target;
            } else if def.is_terminal(target) {
                return Flow::Terminal(target.to_owned());
            } else {
                run.diagnostics.push(format!(
                    "{path}: transition target `{target}` does not exist"
                ));
                return Flow::Aborted;
            }
        }
    }

    fn run_nested<'d>(
        &self,
        run: &mut Run<'_>,
        state: &StateDef,
        path: &str,
        ud: &mut Userdata,
        defaults: &mut Vec<&'d BTreeMap<String, Json>>,
        depth: usize,
    ) -> Flow
    where
        'a: 'd,
    {
        let Some(inner) = self.library.get(&state.binding) else {
            run.diagnostics
                .push(format!("{path}: unknown behavior `{}`", state.binding));
            return Flow::Aborted;
        };
        if depth >= MAX_NESTING {
            run.diagnostics
                .push(format!("{path}: nesting deeper than {MAX_NESTING}"));
            return Flow::Aborted;
        }
        let mut child = Userdata::new();
        for k in &state.input_keys {
            if let Some(v) = ud.get(k) {
                child.insert(k.clone(), v.clone());
            }
        }
        defaults.push(&inner.parameters);
        let flow = self.run_behavior(
            run,
            inner,
            &format!("{path}/"),
            &mut child,
            defaults,
            depth + 1,
        );
        defaults.pop();
        if let Flow::Terminal(_) = flow {
            for k in &state.output_keys {
                if let Some(v) = child.remove(k) {
                    ud.insert(k.clone(), v);
                }
            }
        }
        flow
    }

    fn run_leaf(
        &self,
        run: &mut Run<'_>,
        def: &BehaviorDef,
        state: &StateDef,
        path: &str,
        ud: &mut Userdata,
        defaults: &[&BTreeMap<String, Json>],
    ) -> Flow {
        run.steps += 1;
        if run.steps > self.options.max_steps {
            run.diagnostics.push(format!(
                "{path}: step budget of {} exceeded in `{}`",
                self.options.max_steps, def.name
            ));
            return Flow::Aborted;
        }
        let start = self.elapsed(run);
        let result = match self.resolve_config(state, defaults) {
            Ok(config) => {
                let mut ctx =
                    StateContext::new(path, ud, &state.input_keys, &state.output_keys, &config);
                self.body(state, &mut ctx, run.preempt)
                    .map(|o| (o, ctx.into_staged()))
            }
            Err(f) => Err(f),
        };
        let end = self.elapsed(run);
        let mut record = |outcome: &str, keys: Vec<String>| {
            run.entries.push(TraceEntry {
                state: path.to_owned(),
                outcome: outcome.to_owned(),
                start_s: start,
                end_s: end,
                keys_written: keys,
            })
        };

        if run.preempt.is_preempted() {
            record(PREEMPTED, Vec::new());
            return Flow::Preempted;
        }
        let result = result.and_then(|(outcome, staged)| {
            if state.outcomes.contains(&outcome) {
                Ok((outcome, staged))
            } else {
                Err(Failure::soft(format!(
                    "returned undeclared outcome `{outcome}`"
                )))
            }
        });
        match result {
            Ok((outcome, staged)) => {
                let keys: Vec<String> = staged.keys().cloned().collect();
                for (k, v) in staged {
                    ud.insert(k, v);
                }
                record(&outcome, keys);
                Flow::Terminal(outcome)
            }
            Err(f) => match (&state.error_outcome, f.fatal) {
                (Some(e), false) => {
                    log::debug!("{path}: {} (-> {e})", f.message);
                    run.diagnostics.push(format!("{path}: {}", f.message));
                    record(e, Vec::new());
                    Flow::Terminal(e.clone())
                }
                _ => {
                    log::warn!("{path}: {}", f.message);
                    run.diagnostics.push(format!("{path}: {}", f.message));
                    record(ABORTED, Vec::new());
                    Flow::Aborted
                }
            },
        }
    }

    fn body(
        &self,
        state: &StateDef,
        ctx: &mut StateContext<'_>,
        preempt: &PreemptHandle,
    ) -> Result<String, Failure> {
        match state.kind {
            StateKind::Compute => {
                let f = self.compute.get(&state.binding).ok_or_else(|| {
                    Failure::fatal(format!("unknown compute function `{}`", state.binding))
                })?;
                f(ctx).map_err(Failure::soft)
            }
            StateKind::ServiceCall | StateKind::ActionCall => {
                let request = ServiceRequest {
                    state: ctx.state(),
                    kind: state.kind,
                    slot: &state.binding,
                    operation: state.operation.as_deref(),
                    inputs: ctx.present_inputs(),
                    output_keys: &state.output_keys,
                    config: ctx.config(),
                    cancel: preempt,
                };
                let out = self.services.call(&request).map_err(|e| Failure {
                    fatal: e.is_fatal(),
                    message: e.to_string(),
                })?;
                for (k, v) in out.values {
                    ctx.set(&k, v).map_err(|e| Failure::fatal(e.to_string()))?;
                }
                Ok(out.outcome.unwrap_or_else(|| super::SUCCEEDED.to_owned()))
            }
            StateKind::BehaviorRef => unreachable!("nested states are not leaves"),
        }
    }

    /// Resolves `"$name"` config values: run overrides first, then behavior
    /// defaults from the innermost behavior outward. `"$$text"` yields `"$text"`.
    fn resolve_config(
        &self,
        state: &StateDef,
        defaults: &[&BTreeMap<String, Json>],
    ) -> Result<BTreeMap<String, Json>, Failure> {
        let mut out = BTreeMap::new();
        for (k, v) in &state.config {
            let resolved = match v.as_str() {
                Some(s) if s.starts_with("$$") => Json::String(s[1..].to_owned()),
                Some(s) if s.starts_with('$') => {
                    let name = &s[1..];
                    self.overrides
                        .get(name)
                        .or_else(|| defaults.iter().rev().find_map(|d| d.get(name)))
                        .cloned()
                        .ok_or_else(|| {
                            Failure::fatal(format!(
                                "config `{k}` refers to unknown parameter `{name}`"
                            ))
                        })?
                }
                _ => v.clone(),
            };
            out.insert(k.clone(), resolved);
        }
        Ok(out)
    }
}
