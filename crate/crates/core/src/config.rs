//! Run configuration: which scenario, protocol, behaviors and components an
//! experiment uses. Relative paths resolve against the config file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::bus::schema::DESCRIBE_OP;
use crate::bus::{ComponentDescriptor, Transport};
use crate::engine::{BehaviorDef, BehaviorLibrary, StateKind};
use crate::harness::{Bench, ProtocolDef};
use crate::sim::{Embodiment, Scenario, World};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// World file; falls back to the protocol's `scenario`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub protocol: String,
    /// Behavior files loaded into the library.
    pub behaviors: Vec<String>,
    /// Binding slot to component id.
    pub bindings: BTreeMap<String, String>,
    /// Extra components, reached over sockets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentDescriptor>,
    /// Per-slot call timeout in seconds.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub timeouts: BTreeMap<String, f64>,
    /// Embodiment preset; defaults to the scenario's first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embodiment: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, Json>,
    /// Overrides the protocol's master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    /// A referenced file is missing, unreadable or does not parse.
    #[error("{0}")]
    File(String),
}

/// One validation problem; `slot` is set when it concerns a binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigFinding {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.slot {
            Some(s) => write!(f, "slot `{s}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn finding(slot: Option<&str>, message: impl Into<String>) -> ConfigFinding {
    ConfigFinding {
        slot: slot.map(str::to_owned),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let c: RunConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::File(format!("config: {e}")))?;
        if c.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::File(format!(
                "unsupported config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }
}

/// A config with every file it references loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub path: PathBuf,
    pub scenario: Scenario,
    pub protocol: ProtocolDef,
    pub library: BehaviorLibrary,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::File(format!("{}: {e}", path.display())))
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let config = RunConfig::from_json_str(&read(path)?)
            .map_err(|e| ConfigError::File(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let protocol_path = base.join(&config.protocol);
        let protocol =
            ProtocolDef::load(&protocol_path).map_err(|e| ConfigError::File(e.to_string()))?;
        let scenario_path = match (&config.scenario, &protocol.scenario) {
            (Some(s), _) => base.join(s),
            (None, Some(s)) => protocol_path.parent().unwrap_or(Path::new(".")).join(s),
            (None, None) => {
                return Err(ConfigError::File(format!(
                    "{}: no scenario given",
                    path.display()
                )))
            }
        };
        let scenario = Scenario::load(&scenario_path)
            .map_err(|e| ConfigError::File(format!("{}: {e}", scenario_path.display())))?;
        let mut library = BehaviorLibrary::new();
        for b in &config.behaviors {
            let p = base.join(b);
            let def = BehaviorDef::load(&p).map_err(|e| ConfigError::File(e.to_string()))?;
            library
                .register(def)
                .map_err(|e| ConfigError::File(format!("{}: {e}", p.display())))?;
        }
        Ok(Experiment {
            config,
            path: path.to_owned(),
            scenario,
            protocol,
            library,
        })
    }

    /// The protocol with the config's seed and `seed` (if given) applied, last wins.
    pub fn protocol_with_seed(&self, seed: Option<u64>) -> ProtocolDef {
        let mut p = self.protocol.clone();
        if let Some(s) = seed.or(self.config.seed) {
            p.master_seed = s;
        }
        p
    }

    pub fn output_dir(&self) -> PathBuf {
        let base = self.path.parent().unwrap_or(Path::new("."));
        base.join(self.config.output_dir.as_deref().unwrap_or("out"))
    }

    /// Slots named by service and action states of the loaded behaviors.
    pub fn required_slots(&self) -> BTreeSet<String> {
        self.library
            .iter()
            .flat_map(|b| b.states.iter())
            .filter(|s| matches!(s.kind, StateKind::ServiceCall | StateKind::ActionCall))
            .map(|s| s.binding.clone())
            .collect()
    }

    /// Builds the world and the bench; only the configured bindings are bound.
    pub fn bench(&self) -> Result<Bench, ConfigFinding> {
        let mut world =
            World::from_scenario(&self.scenario).map_err(|e| finding(None, e.to_string()))?;
        if let Some(e) = &self.config.embodiment {
            world.set_embodiment(Embodiment::preset(e).map_err(|e| finding(None, e.to_string()))?);
        }
        let mut bench = Bench::new(world, self.library.clone());
        for d in &self.config.components {
            if !matches!(d.transport, Transport::Socket { .. }) {
                return Err(finding(
                    None,
                    format!(
                        "component `{}`: only socket components can be declared",
                        d.id
                    ),
                ));
            }
            bench
                .register_endpoint(d.clone())
                .map_err(|e| finding(None, e.to_string()))?;
        }
        let defaults: Vec<String> = bench.bindings().keys().cloned().collect();
        for slot in defaults {
            bench.unbind(&slot);
        }
        for (slot, id) in &self.config.bindings {
            bench.bind(slot.clone(), id.clone());
        }
        for (slot, secs) in &self.config.timeouts {
            let t = Duration::try_from_secs_f64(*secs)
                .ok()
                .filter(|t| !t.is_zero())
                .ok_or_else(|| {
                    finding(
                        Some(slot),
                        format!("timeout {secs} s is not a positive duration"),
                    )
                })?;
            bench.set_timeout(slot, t);
        }
        for (k, v) in &self.config.parameters {
            bench.set_parameter(k.clone(), v.clone());
        }
        Ok(bench)
    }

    /// Behavior validation, binding resolution and protocol checks.
    pub fn validate(&self) -> Vec<ConfigFinding> {
        let mut out: Vec<ConfigFinding> = self
            .library
            .validate()
            .into_iter()
            .map(|f| finding(None, format!("behavior {f}")))
            .collect();
        if let Some(e) = &self.config.embodiment {
            if let Err(err) = Embodiment::preset(e) {
                out.push(finding(None, err.to_string()));
            }
        }
        let bench = match self.bench() {
            Ok(b) => b,
            Err(f) => {
                out.push(f);
                return out;
            }
        };
        for slot in self.required_slots() {
            if !self.config.bindings.contains_key(&slot) {
                out.push(finding(Some(&slot), "used by a behavior but not bound"));
            }
        }
        for (slot, id) in &self.config.bindings {
            if !bench.registry().contains(id) {
                out.push(finding(
                    Some(slot),
                    format!("bound to unknown component `{id}`"),
                ));
            }
        }
        for slot in self.config.timeouts.keys() {
            if !self.config.bindings.contains_key(slot) {
                out.push(finding(Some(slot), "has a timeout but no binding"));
            }
        }
        if out.is_empty() {
            if let Err(e) = bench.check(&self.protocol) {
                out.push(finding(None, e.to_string()));
            }
        }
        out
    }

    /// Asks every bound socket component to describe itself; returns the
    /// first unreachable one as `(component id, error)`.
    pub fn probe_endpoints(&self, bench: &Bench) -> Result<(), (String, String)> {
        for b in bench.bindings().values() {
            let Some(d) = bench.registry().resolve(&b.component) else {
                continue;
            };
            if matches!(d.transport, Transport::Socket { .. }) {
                bench
                    .registry()
                    .call_raw(
                        &d.id,
                        DESCRIBE_OP,
                        &Json::Object(Default::default()),
                        b.timeout,
                        None,
                    )
                    .map_err(|e| (d.id.clone(), e.to_string()))?;
            }
        }
        Ok(())
    }
}
