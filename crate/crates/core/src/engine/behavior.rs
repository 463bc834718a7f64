use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::EngineError;

/// Current version of the behavior document format.
pub const BEHAVIOR_SCHEMA_VERSION: u32 = 1;

pub const SUCCEEDED: &str = "succeeded";
pub const ABORTED: &str = "aborted";
pub const PREEMPTED: &str = "preempted";

/// What executing a state means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// Request/response call to the component bound to `binding`.
    ServiceCall,
    /// Long-running call; like a service call but cancellable on preemption.
    ActionCall,
    /// Built-in function from the compute registry named by `binding`.
    Compute,
    /// Nested behavior named by `binding`.
    BehaviorRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDef {
    pub name: String,
    pub kind: StateKind,
    pub binding: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operation: Option<String>,
    #[serde(default)]
    pub input_keys: Vec<String>,
    #[serde(default)]
    pub output_keys: Vec<String>,
    pub outcomes: Vec<String>,
    /// Literal settings passed to the state. String values of the form
    /// `"$name"` resolve to behavior parameters; `"$$..."` escapes a literal `$`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, Json>,
    /// Outcome taken when the state fails; without it a failure aborts the behavior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_outcome: Option<String>,
}

impl StateDef {
    pub fn new(name: impl Into<String>, kind: StateKind, binding: impl Into<String>) -> Self {
        StateDef {
            name: name.into(),
            kind,
            binding: binding.into(),
            operation: None,
            input_keys: Vec::new(),
            output_keys: Vec::new(),
            outcomes: vec![SUCCEEDED.to_owned()],
            config: BTreeMap::new(),
            error_outcome: None,
        }
    }

    pub fn operation(mut self, op: impl Into<String>) -> Self {
        self.operation = Some(op.into());
        self
    }

    pub fn inputs<S: Into<String>>(mut self, keys: impl IntoIterator<Item = S>) -> Self {
        self.input_keys = keys.into_iter().map(Into::into).collect();
        self
    }

    pub fn outputs<S: Into<String>>(mut self, keys: impl IntoIterator<Item = S>) -> Self {
        self.output_keys = keys.into_iter().map(Into::into).collect();
        self
    }

    pub fn outcomes<S: Into<String>>(mut self, outcomes: impl IntoIterator<Item = S>) -> Self {
        self.outcomes = outcomes.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_config(mut self, key: impl Into<String>, value: Json) -> Self {
        self.config.insert(key.into(), value);
        self
    }

    pub fn on_error(mut self, outcome: impl Into<String>) -> Self {
        self.error_outcome = Some(outcome.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: String,
    pub outcome: String,
    /// A state name or one of the behavior's terminal outcomes.
    pub target: String,
}

/// A declarative state machine: states, outcome-labeled transitions, terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorDef {
    pub name: String,
    pub states: Vec<StateDef>,
    pub initial: String,
    pub transitions: Vec<Transition>,
    pub terminal_outcomes: Vec<String>,
    pub parameters: BTreeMap<String, Json>,
}

impl BehaviorDef {
    pub fn new(name: impl Into<String>, initial: impl Into<String>) -> Self {
        BehaviorDef {
            name: name.into(),
            states: Vec::new(),
            initial: initial.into(),
            transitions: Vec::new(),
            terminal_outcomes: Vec::new(),
            parameters: BTreeMap::new(),
        }
    }

    pub fn state(mut self, state: StateDef) -> Self {
        self.states.push(state);
        self
    }

    pub fn transition(mut self, state: &str, outcome: &str, target: &str) -> Self {
        self.transitions.push(Transition {
            state: state.to_owned(),
            outcome: outcome.to_owned(),
            target: target.to_owned(),
        });
        self
    }

    pub fn terminals<S: Into<String>>(mut self, outcomes: impl IntoIterator<Item = S>) -> Self {
        self.terminal_outcomes = outcomes.into_iter().map(Into::into).collect();
        self
    }

    pub fn parameter(mut self, key: impl Into<String>, value: Json) -> Self {
        self.parameters.insert(key.into(), value);
        self
    }

    pub fn find_state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn target(&self, state: &str, outcome: &str) -> Option<&str> {
        self.transitions
            .iter()
            .find(|t| t.state == state && t.outcome == outcome)
            .map(|t| t.target.as_str())
    }

    pub fn is_terminal(&self, label: &str) -> bool {
        self.terminal_outcomes.iter().any(|t| t == label)
    }

    pub fn from_json_str(text: &str) -> Result<Self, EngineError> {
        let doc: BehaviorDocument =
            serde_json::from_str(text).map_err(|e| EngineError::Load(e.to_string()))?;
        doc.try_into()
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Load(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            EngineError::Load(m) => EngineError::Load(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_document(&self) -> BehaviorDocument {
        let states = self
            .states
            .iter()
            .map(|s| StateDocument {
                state: s.clone(),
                transitions: self
                    .transitions
                    .iter()
                    .filter(|t| t.state == s.name)
                    .map(|t| (t.outcome.clone(), t.target.clone()))
                    .collect(),
            })
            .collect();
        BehaviorDocument {
            schema_version: BEHAVIOR_SCHEMA_VERSION,
            name: self.name.clone(),
            initial: self.initial.clone(),
            terminal_outcomes: self.terminal_outcomes.clone(),
            parameters: self.parameters.clone(),
            states,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).unwrap_or_default()
    }
}

/// On-disk form of a behavior; transitions live next to the state they leave.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorDocument {
    pub schema_version: u32,
    pub name: String,
    pub initial: String,
    pub terminal_outcomes: Vec<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Json>,
    pub states: Vec<StateDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDocument {
    #[serde(flatten)]
    pub state: StateDef,
    #[serde(default)]
    pub transitions: BTreeMap<String, String>,
}

impl TryFrom<BehaviorDocument> for BehaviorDef {
    type Error = EngineError;

    fn try_from(doc: BehaviorDocument) -> Result<Self, Self::Error> {
        if doc.schema_version != BEHAVIOR_SCHEMA_VERSION {
            return Err(EngineError::Load(format!(
                "unsupported behavior schema_version {} (expected {BEHAVIOR_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        let mut transitions = Vec::new();
        let mut states = Vec::with_capacity(doc.states.len());
        for sd in doc.states {
            for (outcome, target) in sd.transitions {
                transitions.push(Transition {
                    state: sd.state.name.clone(),
                    outcome,
                    target,
                });
            }
            states.push(sd.state);
        }
        Ok(BehaviorDef {
            name: doc.name,
            states,
            initial: doc.initial,
            transitions,
            terminal_outcomes: doc.terminal_outcomes,
            parameters: doc.parameters,
        })
    }
}
