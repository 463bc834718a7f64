use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde_json::Value as Json;

use super::record::{RecordSink, TrialOutcome, TrialRecord, RECORD_SCHEMA_VERSION, TRACES_FILE};
use super::{describe, plan_trials, Condition, HarnessError, PlannedTrial, ProtocolDef};
use crate::bus::{
    Binding, BoundServices, Component, ComponentDescriptor, Registry, DEFAULT_TIMEOUT,
};
use crate::components::{compute_registry, reference_components};
use crate::engine::{
    BehaviorDef, BehaviorLibrary, ComputeRegistry, ExecOptions, Executor, PreemptHandle, StateDef,
    StateKind, Userdata, ABORTED, DEFAULT_MAX_STEPS, PREEMPTED, SUCCEEDED,
};
use crate::sim::{
    lighting_scale, texture_scale, Embodiment, SharedWorld, SimApparatus, SimRobot, World,
};
use crate::types::Value;

pub const GRASP_PLANNER_SLOT: &str = "grasp_planner";
pub const MOTION_PLANNER_SLOT: &str = "motion_planner";
pub const PERCEPTION_SLOT: &str = "perception";
pub const ROBOT_SLOT: &str = "robot";
pub const APPARATUS_SLOT: &str = "apparatus";

/// Name of the per-trial wrapper behavior.
pub const TRIAL_BEHAVIOR: &str = "trial";
/// Compute function that checks the world against its nominal state.
pub const VERIFY_RESET: &str = "verify_reset";
/// Wrapper terminal taken when the reset stage fails.
pub const RESET_FAILED: &str = "reset_failed";
/// Failure reason recorded for a trial whose reset failed.
pub const RESET_FAILURE: &str = "reset-failure";

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Stop the protocol at the first failed reset.
    pub fail_fast: bool,
    /// Record wall-clock timing; off for byte-stable logs.
    pub timestamps: bool,
    /// The bound components passed conformance; a warning is logged otherwise.
    pub conformance_verified: bool,
    pub max_steps: usize,
    /// Stops the run: the current trial ends preempted and no further trial starts.
    pub preempt: Option<PreemptHandle>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            fail_fast: false,
            timestamps: true,
            conformance_verified: true,
            max_steps: DEFAULT_MAX_STEPS,
            preempt: None,
        }
    }
}

/// Scenario-level settings a condition starts from.
#[derive(Debug, Clone)]
struct Baseline {
    embodiment: Embodiment,
    workspace_elevation: f64,
    lighting_noise_scale: f64,
    texture_noise_scale: f64,
}

/// What the verification state saw at the start of manipulation.
#[derive(Default)]
struct ResetProbe {
    verified: bool,
    deviation: Option<String>,
    snapshot: Option<World>,
}

/// A world, its components and behaviors, ready to run protocols.
///
/// The world persists across trials; each trial reconfigures it for its
/// condition, runs the reset stage and checks the nominal state before the
/// manipulation behavior starts.
pub struct Bench {
    library: BehaviorLibrary,
    registry: Registry,
    world: SharedWorld,
    baseline: Baseline,
    bindings: BTreeMap<String, Binding>,
    parameters: BTreeMap<String, Json>,
    compute: ComputeRegistry,
    run_lock: Mutex<()>,
}

impl Bench {
    /// Registers the reference components and the simulated robot and
    /// apparatus, with every slot bound to its reference default.
    pub fn new(world: World, library: BehaviorLibrary) -> Self {
        let baseline = Baseline {
            embodiment: world.embodiment.clone(),
            workspace_elevation: world.workspace_elevation,
            lighting_noise_scale: world.lighting_noise_scale,
            texture_noise_scale: world.texture_noise_scale,
        };
        let world: SharedWorld = Arc::new(Mutex::new(world));
        let registry = Registry::new();
        for c in reference_components() {
            registry
                .register(c)
                .expect("reference descriptors are valid and distinct");
        }
        registry
            .register(Arc::new(SimRobot::new(world.clone())))
            .expect("sim robot registers");
        registry
            .register(Arc::new(SimApparatus::new(world.clone())))
            .expect("sim apparatus registers");
        let bindings = [
            (GRASP_PLANNER_SLOT, crate::components::TOP_SURFACE_ID),
            (MOTION_PLANNER_SLOT, crate::components::LINE_MOTION_ID),
            (PERCEPTION_SLOT, crate::components::PLANE_CROP_ID),
            (ROBOT_SLOT, crate::sim::SIM_ROBOT_ID),
            (APPARATUS_SLOT, crate::sim::SIM_APPARATUS_ID),
        ]
        .into_iter()
        .map(|(s, id)| (s.to_owned(), Binding::new(id)))
        .collect();
        Bench {
            library,
            registry,
            world,
            baseline,
            bindings,
            parameters: BTreeMap::new(),
            compute: compute_registry(),
            run_lock: Mutex::new(()),
        }
    }

    pub fn register(
        &self,
        component: Arc<dyn Component>,
    ) -> Result<ComponentDescriptor, HarnessError> {
        Ok(self.registry.register(component)?)
    }

    pub fn register_endpoint(
        &self,
        descriptor: ComponentDescriptor,
    ) -> Result<ComponentDescriptor, HarnessError> {
        Ok(self.registry.register_endpoint(descriptor)?)
    }

    /// Binds `slot` to a registered component id.
    pub fn bind(&mut self, slot: impl Into<String>, component: impl Into<String>) -> &mut Self {
        let slot = slot.into();
        let timeout = self
            .bindings
            .get(&slot)
            .map_or(DEFAULT_TIMEOUT, |b| b.timeout);
        self.bindings.insert(
            slot,
            Binding {
                component: component.into(),
                timeout,
            },
        );
        self
    }

    pub fn set_timeout(&mut self, slot: &str, timeout: Duration) -> &mut Self {
        if let Some(b) = self.bindings.get_mut(slot) {
            b.timeout = timeout;
        }
        self
    }

    pub fn unbind(&mut self, slot: &str) -> &mut Self {
        self.bindings.remove(slot);
        self
    }

    /// Behavior parameter overrides applied to every trial.
    pub fn set_parameter(&mut self, name: impl Into<String>, value: Json) -> &mut Self {
        self.parameters.insert(name.into(), value);
        self
    }

    pub fn bindings(&self) -> &BTreeMap<String, Binding> {
        &self.bindings
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn library(&self) -> &BehaviorLibrary {
        &self.library
    }

    pub fn world(&self) -> SharedWorld {
        self.world.clone()
    }

    fn lock_world(&self) -> MutexGuard<'_, World> {
        self.world.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Checks that a protocol can run here without executing anything.
    pub fn check(&self, protocol: &ProtocolDef) -> Result<Vec<PlannedTrial>, HarnessError> {
        let plan = plan_trials(protocol)?;
        let mut behaviors = BTreeSet::from([protocol.behavior.as_str()]);
        if let Some(r) = &protocol.reset_behavior {
            behaviors.insert(r.as_str());
        }
        for (name, levels) in &protocol.factors {
            for level in levels {
                let mut probe = Condition::new();
                probe.insert(name.clone(), level.clone());
                self.resolve(protocol, &probe)?;
                if name == "behavior" {
                    behaviors.insert(level.as_str());
                }
            }
        }
        for b in behaviors {
            let Some(def) = self.library.get(b) else {
                return Err(HarnessError::Behavior(format!("unknown behavior `{b}`")));
            };
            let findings = self.library.validate_tree(def);
            if let Some(f) = findings.first() {
                return Err(HarnessError::Behavior(format!(
                    "{f} ({} finding(s))",
                    findings.len()
                )));
            }
        }
        Ok(plan)
    }

    /// Maps a condition onto world settings, bindings and parameters.
    fn resolve(
        &self,
        protocol: &ProtocolDef,
        condition: &Condition,
    ) -> Result<Setup, HarnessError> {
        let world = self.lock_world();
        let mut s = Setup {
            behavior: protocol.behavior.clone(),
            embodiment: self.baseline.embodiment.clone(),
            active: None,
            elevation: self.baseline.workspace_elevation,
            lighting: self.baseline.lighting_noise_scale,
            texture: self.baseline.texture_noise_scale,
            bindings: self.bindings.clone(),
            parameters: self.parameters.clone(),
        };
        let bad = |name: &str, level: &str, why: &str| {
            HarnessError::Condition(format!("factor `{name}` level `{level}`: {why}"))
        };
        for (name, level) in condition {
            match name.as_str() {
                "embodiment" | "robot" => {
                    s.embodiment =
                        Embodiment::preset(level).map_err(|e| bad(name, level, &e.to_string()))?
                }
                "object" => {
                    if world.object(level).is_none() {
                        return Err(bad(name, level, "no such object in the world"));
                    }
                    s.active = Some(BTreeSet::from([level.clone()]));
                }
                "lighting" => {
                    s.lighting = lighting_scale(level)
                        .ok_or_else(|| bad(name, level, "unknown lighting level"))?
                }
                "texture" => {
                    s.texture = texture_scale(level)
                        .ok_or_else(|| bad(name, level, "unknown texture level"))?
                }
                "elevation" => {
                    s.elevation = level
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(name, level, "elevation must be a number in meters"))?
                }
                "planner" => rebind(&mut s.bindings, &self.registry, GRASP_PLANNER_SLOT, level)
                    .map_err(|w| bad(name, level, &w))?,
                "behavior" => {
                    if self.library.get(level).is_none() {
                        return Err(bad(name, level, "no such behavior"));
                    }
                    s.behavior = level.clone();
                }
                other => {
                    if let Some(slot) = other.strip_prefix("component:") {
                        rebind(&mut s.bindings, &self.registry, slot, level)
                            .map_err(|w| bad(name, level, &w))?;
                    } else if let Some(p) = other.strip_prefix("param:") {
                        let v = serde_json::from_str(level)
                            .unwrap_or_else(|_| Json::String(level.clone()));
                        s.parameters.insert(p.to_owned(), v);
                    } else {
                        return Err(HarnessError::Condition(format!("unknown factor `{other}`")));
                    }
                }
            }
        }
        Ok(s)
    }

    /// Executes every planned trial in order, streaming records to `sink`.
    pub fn run_protocol(
        &self,
        protocol: &ProtocolDef,
        sink: &mut dyn RecordSink,
        options: &RunOptions,
    ) -> Result<Vec<TrialRecord>, HarnessError> {
        self.run_protocol_observed(protocol, sink, options, &mut |_, _| {})
    }

    /// Like [`Bench::run_protocol`]; `observer` sees the world as it was when
    /// each trial's manipulation started.
    pub fn run_protocol_observed(
        &self,
        protocol: &ProtocolDef,
        sink: &mut dyn RecordSink,
        options: &RunOptions,
        observer: &mut dyn FnMut(&PlannedTrial, &World),
    ) -> Result<Vec<TrialRecord>, HarnessError> {
        let _exclusive = self.run_lock.try_lock().map_err(|_| {
            HarnessError::Behavior("the world is already owned by another protocol run".into())
        })?;
        let plan = self.check(protocol)?;
        if !options.conformance_verified {
            log::warn!(
                "running `{}` without a conformance check of the bound components",
                protocol.name
            );
        }
        let preempt = options.preempt.clone().unwrap_or_default();
        let mut records = Vec::with_capacity(plan.len());
        for trial in &plan {
            if preempt.is_preempted() {
                log::warn!(
                    "protocol `{}` stopped before trial {}",
                    protocol.name,
                    trial.trial_id
                );
                break;
            }
            let setup = self.resolve(protocol, &trial.condition)?;
            let (record, trace, snapshot) =
                self.run_trial(protocol, trial, &setup, options, &preempt)?;
            log::info!(
                "trial {} {}: {}",
                trial.trial_id,
                describe(&trial.condition),
                record.outcome.label()
            );
            sink.record(&record, &trace)?;
            if let Some(w) = &snapshot {
                observer(trial, w);
            }
            let reset_failed = !record.reset_verified;
            let detail = record.diagnostic.clone().unwrap_or_default();
            records.push(record);
            if reset_failed && options.fail_fast {
                return Err(HarnessError::ResetFailed {
                    trial_id: trial.trial_id,
                    detail,
                });
            }
        }
        Ok(records)
    }

    fn run_trial(
        &self,
        protocol: &ProtocolDef,
        trial: &PlannedTrial,
        setup: &Setup,
        options: &RunOptions,
        preempt: &PreemptHandle,
    ) -> Result<(TrialRecord, crate::engine::ExecutionTrace, Option<World>), HarnessError> {
        {
            let mut w = self.lock_world();
            w.set_embodiment(setup.embodiment.clone());
            w.set_active(setup.active.clone())?;
            w.workspace_elevation = setup.elevation;
            w.lighting_noise_scale = setup.lighting;
            w.texture_noise_scale = setup.texture;
            w.rng_seed = trial.seed;
            if protocol.reset_behavior.is_none() {
                w.reset_objects();
                w.reset_apparatus();
            }
        }

        let probe = Arc::new(Mutex::new(ResetProbe::default()));
        let mut compute = self.compute.clone();
        {
            let world = self.world.clone();
            let probe = probe.clone();
            compute.register(VERIFY_RESET, move |_| {
                let w = world.lock().unwrap_or_else(|p| p.into_inner());
                let mut p = probe.lock().unwrap_or_else(|p| p.into_inner());
                p.deviation = w.nominal_deviation();
                p.verified = p.deviation.is_none();
                p.snapshot = Some(w.clone());
                Ok(if p.verified { SUCCEEDED } else { "failed" }.to_owned())
            });
        }

        let manipulation = self
            .library
            .get(&setup.behavior)
            .expect("checked before the run");
        let reset = protocol
            .reset_behavior
            .as_deref()
            .and_then(|r| self.library.get(r));
        let wrapper = trial_wrapper(reset, manipulation);
        let services = setup
            .bindings
            .iter()
            .fold(BoundServices::new(&self.registry), |s, (slot, b)| {
                s.bind(slot.clone(), b.clone())
            });
        let executor = Executor::new(&self.library, &services, &compute)
            .parameters(setup.parameters.clone())
            .options(ExecOptions {
                max_steps: options.max_steps,
                timestamps: options.timestamps,
            });
        let started = Instant::now();
        let exec = executor.execute_def(&wrapper, Userdata::new(), preempt);
        let duration_s = if options.timestamps {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };

        let probe = std::mem::take(&mut *probe.lock().unwrap_or_else(|p| p.into_inner()));
        let reason = match exec.userdata.get("failure_reason") {
            Some(Value::Text(t)) if !t.is_empty() => Some(t.clone()),
            _ => None,
        };
        let outcome = match exec.outcome.as_str() {
            SUCCEEDED => TrialOutcome::Success,
            ABORTED => TrialOutcome::Aborted,
            PREEMPTED => TrialOutcome::Preempted,
            RESET_FAILED => TrialOutcome::Failure {
                reason: RESET_FAILURE.into(),
            },
            other => TrialOutcome::Failure {
                reason: reason.unwrap_or_else(|| other.to_owned()),
            },
        };
        let mut notes = exec.diagnostics.clone();
        if let Some(d) = &probe.deviation {
            notes.push(format!("reset: {d}"));
        }
        let record = TrialRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            trial_id: trial.trial_id,
            condition: trial.condition.clone(),
            rep: trial.rep,
            outcome,
            duration_s,
            components: setup
                .bindings
                .iter()
                .map(|(k, b)| (k.clone(), b.component.clone()))
                .collect(),
            seed: trial.seed,
            trace_ref: format!("{TRACES_FILE}#{}", trial.trial_id),
            reset_verified: probe.verified,
            diagnostic: (!notes.is_empty()).then(|| notes.join("; ")),
        };
        let snapshot = probe.snapshot.filter(|_| probe.verified);
        Ok((record, exec.trace, snapshot))
    }
}

struct Setup {
    behavior: String,
    embodiment: Embodiment,
    active: Option<BTreeSet<String>>,
    elevation: f64,
    lighting: f64,
    texture: f64,
    bindings: BTreeMap<String, Binding>,
    parameters: BTreeMap<String, Json>,
}

fn rebind(
    bindings: &mut BTreeMap<String, Binding>,
    registry: &Registry,
    slot: &str,
    id: &str,
) -> Result<(), String> {
    if !registry.contains(id) {
        return Err(format!("component `{id}` is not registered"));
    }
    let timeout = bindings.get(slot).map_or(DEFAULT_TIMEOUT, |b| b.timeout);
    bindings.insert(
        slot.to_owned(),
        Binding {
            component: id.to_owned(),
            timeout,
        },
    );
    Ok(())
}

/// `reset -> verify -> manipulate`. The manipulation's terminals pass
/// through unchanged; a failed reset or verification ends in `reset_failed`.
fn trial_wrapper(reset: Option<&BehaviorDef>, manipulation: &BehaviorDef) -> BehaviorDef {
    let outcomes = manipulation.terminal_outcomes.clone();
    let mut terminals = outcomes.clone();
    if !terminals.iter().any(|t| t == RESET_FAILED) {
        terminals.push(RESET_FAILED.to_owned());
    }
    let mut def = BehaviorDef::new(
        TRIAL_BEHAVIOR,
        if reset.is_some() { "reset" } else { "verify" },
    );
    if let Some(r) = reset {
        let mut reset_outcomes = r.terminal_outcomes.clone();
        if !reset_outcomes.iter().any(|t| t == RESET_FAILED) {
            reset_outcomes.push(RESET_FAILED.to_owned());
        }
        def = def.state(
            StateDef::new("reset", StateKind::BehaviorRef, r.name.clone())
                .outcomes(reset_outcomes.clone())
                .on_error(RESET_FAILED),
        );
        for o in &reset_outcomes {
            def = def.transition(
                "reset",
                o,
                if o == SUCCEEDED {
                    "verify"
                } else {
                    RESET_FAILED
                },
            );
        }
    }
    def = def
        .state(
            StateDef::new("verify", StateKind::Compute, VERIFY_RESET)
                .outcomes([SUCCEEDED, "failed"]),
        )
        .state(
            StateDef::new(
                "manipulate",
                StateKind::BehaviorRef,
                manipulation.name.clone(),
            )
            .outputs(["grasp_success", "failure_reason"])
            .outcomes(outcomes.clone()),
        )
        .transition("verify", SUCCEEDED, "manipulate")
        .transition("verify", "failed", RESET_FAILED);
    for o in &outcomes {
        def = def.transition("manipulate", o, o);
    }
    def.terminals(terminals)
}
