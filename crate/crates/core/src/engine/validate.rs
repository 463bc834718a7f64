use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{is_reserved_label, BehaviorDef, EngineError, StateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    UnknownInitial,
    DuplicateState,
    EmptyOutcomes,
    ReservedOutcome,
    MissingTransition,
    DuplicateTransition,
    UndeclaredOutcome,
    UnknownState,
    UnknownTarget,
    Unreachable,
    TerminalShadowsState,
    ErrorOutcomeUndeclared,
    UnknownBehavior,
    RecursiveBehavior,
    UnmappedInnerOutcome,
}

/// One invariant violation, located by behavior, state and outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub behavior: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.behavior)?;
        if let Some(s) = &self.state {
            write!(f, "/{s}")?;
        }
        if let Some(o) = &self.outcome {
            write!(f, " [{o}]")?;
        }
        write!(f, ": {}", self.message)
    }
}

struct Collector<'a> {
    behavior: &'a str,
    findings: Vec<Finding>,
}

impl Collector<'_> {
    fn push(
        &mut self,
        kind: FindingKind,
        state: Option<&str>,
        outcome: Option<&str>,
        message: String,
    ) {
        self.findings.push(Finding {
            kind,
            behavior: self.behavior.to_owned(),
            state: state.map(str::to_owned),
            outcome: outcome.map(str::to_owned),
            message,
        });
    }
}

/// Checks the structural invariants of a single behavior.
///
/// Returns an empty list iff the behavior is well formed. References to other
/// behaviors are checked by [`BehaviorLibrary::validate`].
pub fn validate_behavior(def: &BehaviorDef) -> Vec<Finding> {
    use FindingKind::*;
    let mut c = Collector {
        behavior: &def.name,
        findings: Vec::new(),
    };

    let mut names = BTreeSet::new();
    for s in &def.states {
        if !names.insert(s.name.as_str()) {
            c.push(
                DuplicateState,
                Some(&s.name),
                None,
                format!("state `{}` is defined more than once", s.name),
            );
        }
    }
    if def.find_state(&def.initial).is_none() {
        c.push(
            UnknownInitial,
            None,
            None,
            format!("initial state `{}` does not exist", def.initial),
        );
    }
    for t in &def.terminal_outcomes {
        if names.contains(t.as_str()) {
            c.push(
                TerminalShadowsState,
                None,
                Some(t),
                format!("terminal outcome `{t}` has the same name as a state"),
            );
        }
    }

    for s in &def.states {
        if s.outcomes.is_empty() {
            c.push(
                EmptyOutcomes,
                Some(&s.name),
                None,
                "state declares no outcomes".into(),
            );
        }
        let mut seen = BTreeSet::new();
        for o in &s.outcomes {
            if is_reserved_label(o) {
                c.push(
                    ReservedOutcome,
                    Some(&s.name),
                    Some(o),
                    format!("outcome `{o}` uses a reserved label"),
                );
            }
            if !seen.insert(o.as_str()) {
                c.push(
                    DuplicateTransition,
                    Some(&s.name),
                    Some(o),
                    format!("outcome `{o}` is declared twice"),
                );
            }
            let n = def
                .transitions
                .iter()
                .filter(|t| t.state == s.name && &t.outcome == o)
                .count();
            if n == 0 {
                c.push(
                    MissingTransition,
                    Some(&s.name),
                    Some(o),
                    format!("no transition for outcome `{o}`"),
                );
            } else if n > 1 {
                c.push(
                    DuplicateTransition,
                    Some(&s.name),
                    Some(o),
                    format!("{n} transitions for outcome `{o}`"),
                );
            }
        }
        if let Some(e) = &s.error_outcome {
            if !s.outcomes.contains(e) {
                c.push(
                    ErrorOutcomeUndeclared,
                    Some(&s.name),
                    Some(e),
                    format!("error outcome `{e}` is not a declared outcome"),
                );
            }
        }
    }

    for t in &def.transitions {
        match def.find_state(&t.state) {
            None => c.push(
                UnknownState,
                Some(&t.state),
                Some(&t.outcome),
                format!("transition leaves unknown state `{}`", t.state),
            ),
            Some(s) if !s.outcomes.contains(&t.outcome) => c.push(
                UndeclaredOutcome,
                Some(&t.state),
                Some(&t.outcome),
                format!("transition on undeclared outcome `{}`", t.outcome),
            ),
            Some(_) => {}
        }
        if def.find_state(&t.target).is_none() && !def.is_terminal(&t.target) {
            c.push(
                UnknownTarget,
                Some(&t.state),
                Some(&t.outcome),
                format!(
                    "target `{}` is neither a state nor a terminal outcome",
                    t.target
                ),
            );
        }
    }

    if def.find_state(&def.initial).is_some() {
        let mut reached = BTreeSet::from([def.initial.as_str()]);
        let mut queue = VecDeque::from([def.initial.as_str()]);
        while let Some(s) = queue.pop_front() {
            for t in def.transitions.iter().filter(|t| t.state == s) {
                if names.contains(t.target.as_str()) && reached.insert(t.target.as_str()) {
                    queue.push_back(&t.target);
                }
            }
        }
        let mut reported = BTreeSet::new();
        for s in &def.states {
            if !reached.contains(s.name.as_str()) && reported.insert(s.name.as_str()) {
                c.push(
                    Unreachable,
                    Some(&s.name),
                    None,
                    format!("state `{}` is unreachable from `{}`", s.name, def.initial),
                );
            }
        }
    }
    c.findings
}

/// The set of behaviors available to `behavior_ref` states.
#[derive(Debug, Clone, Default)]
pub struct BehaviorLibrary {
    behaviors: BTreeMap<String, BehaviorDef>,
}

impl BehaviorLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, def: BehaviorDef) -> Result<(), EngineError> {
        if self.behaviors.contains_key(&def.name) {
            return Err(EngineError::DuplicateBehavior(def.name));
        }
        self.behaviors.insert(def.name.clone(), def);
        Ok(())
    }

    pub fn with(mut self, def: BehaviorDef) -> Result<Self, EngineError> {
        self.register(def)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&BehaviorDef> {
        self.behaviors.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.behaviors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BehaviorDef> {
        self.behaviors.values()
    }

    /// Validates every behavior plus the references between them.
    pub fn validate(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        for def in self.behaviors.values() {
            out.extend(self.validate_one(def));
        }
        out
    }

    /// Validates `name` and every behavior it reaches through `behavior_ref`.
    pub fn validate_from(&self, name: &str) -> Vec<Finding> {
        match self.behaviors.get(name) {
            Some(root) => self.validate_tree(root),
            None => vec![Finding {
                kind: FindingKind::UnknownBehavior,
                behavior: name.to_owned(),
                state: None,
                outcome: None,
                message: format!("behavior `{name}` is not registered"),
            }],
        }
    }

    /// Validates `def`, which need not be registered, and every library
    /// behavior it reaches.
    pub fn validate_tree(&self, def: &BehaviorDef) -> Vec<Finding> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![def];
        let mut out = Vec::new();
        while let Some(def) = stack.pop() {
            if !seen.insert(def.name.as_str()) {
                continue;
            }
            out.extend(self.validate_one(def));
            for s in def
                .states
                .iter()
                .filter(|s| s.kind == StateKind::BehaviorRef)
            {
                if let Some(inner) = self.behaviors.get(&s.binding) {
                    stack.push(inner);
                }
            }
        }
        out
    }

    fn validate_one(&self, def: &BehaviorDef) -> Vec<Finding> {
        use FindingKind::*;
        let mut findings = validate_behavior(def);
        let mut c = Collector {
            behavior: &def.name,
            findings: Vec::new(),
        };
        for s in def
            .states
            .iter()
            .filter(|s| s.kind == StateKind::BehaviorRef)
        {
            let Some(inner) = self.behaviors.get(&s.binding) else {
                c.push(
                    UnknownBehavior,
                    Some(&s.name),
                    None,
                    format!("references unknown behavior `{}`", s.binding),
                );
                continue;
            };
            if self.reaches(&s.binding, &def.name) {
                c.push(
                    RecursiveBehavior,
                    Some(&s.name),
                    None,
                    format!("behavior `{}` refers back to `{}`", s.binding, def.name),
                );
            }
            for t in &inner.terminal_outcomes {
                if !s.outcomes.contains(t) {
                    c.push(
                        UnmappedInnerOutcome,
                        Some(&s.name),
                        Some(t),
                        format!(
                            "outcome `{t}` of behavior `{}` is not declared by this state",
                            inner.name
                        ),
                    );
                }
            }
        }
        findings.extend(c.findings);
        findings
    }

    /// Whether `from` can reach `to` through behavior references (inclusive).
    fn reaches(&self, from: &str, to: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(name) = stack.pop() {
            if name == to {
                return true;
            }
            if !seen.insert(name) {
                continue;
            }
            if let Some(def) = self.behaviors.get(name) {
                stack.extend(
                    def.states
                        .iter()
                        .filter(|s| s.kind == StateKind::BehaviorRef)
                        .map(|s| s.binding.as_str()),
                );
            }
        }
        false
    }
}
