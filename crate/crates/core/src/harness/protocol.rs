use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const PROTOCOL_SCHEMA_VERSION: u32 = 1;

/// One factor-level assignment, in factor order.
pub type Condition = IndexMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// `seed = splitmix64(master ^ splitmix64(trial_id))`.
    #[default]
    PerTrial,
    /// Every trial runs with the master seed.
    Fixed,
}

/// Explicit trial count for one combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinationCount {
    pub condition: Condition,
    pub count: u32,
}

/// A factorial experiment definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDef {
    pub schema_version: u32,
    pub name: String,
    /// Manipulation behavior; a `behavior` factor overrides it per trial.
    pub behavior: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_behavior: Option<String>,
    /// World file, relative to the protocol file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default)]
    pub factors: IndexMap<String, Vec<String>>,
    /// Uniform repetitions per combination; exclusive with `counts`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u32>,
    /// Explicit per-combination counts; every combination must be listed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<CombinationCount>>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub seed_policy: SeedPolicy,
    /// Free-form remarks carried along with the protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl ProtocolDef {
    pub fn new(name: impl Into<String>, behavior: impl Into<String>) -> Self {
        ProtocolDef {
            schema_version: PROTOCOL_SCHEMA_VERSION,
            name: name.into(),
            behavior: behavior.into(),
            reset_behavior: None,
            scenario: None,
            factors: IndexMap::new(),
            reps: Some(1),
            counts: None,
            master_seed: 0,
            seed_policy: SeedPolicy::PerTrial,
            notes: None,
        }
    }

    pub fn factor<S: Into<String>>(
        mut self,
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Self {
        self.factors
            .insert(name.into(), levels.into_iter().map(Into::into).collect());
        self
    }

    pub fn reps(mut self, reps: u32) -> Self {
        self.reps = Some(reps);
        self.counts = None;
        self
    }

    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let p: ProtocolDef =
            serde_json::from_str(text).map_err(|e| HarnessError::Protocol(e.to_string()))?;
        if p.schema_version != PROTOCOL_SCHEMA_VERSION {
            return Err(HarnessError::Protocol(format!(
                "unsupported protocol schema_version {} (expected {PROTOCOL_SCHEMA_VERSION})",
                p.schema_version
            )));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            HarnessError::Protocol(m) => HarnessError::Protocol(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// All combinations in lexicographic factor order, with their counts.
    pub fn combinations(&self) -> Result<Vec<(Condition, u64)>, HarnessError> {
        for (name, levels) in &self.factors {
            if levels.is_empty() {
                return Err(HarnessError::Protocol(format!(
                    "factor `{name}` has no levels"
                )));
            }
            if let Some(dup) = levels
                .iter()
                .enumerate()
                .find(|(i, l)| levels[..*i].contains(l))
            {
                return Err(HarnessError::Protocol(format!(
                    "factor `{name}` lists level `{}` twice",
                    dup.1
                )));
            }
        }
        let mut combos: Vec<Condition> = vec![Condition::new()];
        for (name, levels) in &self.factors {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    levels.iter().map(move |l| {
                        let mut c = c.clone();
                        c.insert(name.clone(), l.clone());
                        c
                    })
                })
                .collect();
        }
        match (&self.reps, &self.counts) {
            (Some(_), Some(_)) => Err(HarnessError::Protocol(
                "give either `reps` or `counts`, not both".into(),
            )),
            (None, None) => Err(HarnessError::Protocol(
                "one of `reps` or `counts` is required".into(),
            )),
            (Some(0), None) => Err(HarnessError::Protocol("reps must be at least 1".into())),
            (Some(r), None) => Ok(combos.into_iter().map(|c| (c, u64::from(*r))).collect()),
            (None, Some(counts)) => {
                let mut out = Vec::with_capacity(combos.len());
                for c in combos {
                    let matching: Vec<&CombinationCount> = counts
                        .iter()
                        .filter(|e| same_condition(&e.condition, &c))
                        .collect();
                    match matching.as_slice() {
                        [one] => out.push((c, u64::from(one.count))),
                        [] => {
                            return Err(HarnessError::Protocol(format!(
                                "no count for combination {}",
                                describe(&c)
                            )))
                        }
                        _ => {
                            return Err(HarnessError::Protocol(format!(
                                "combination {} counted twice",
                                describe(&c)
                            )))
                        }
                    }
                }
                if let Some(stray) = counts
                    .iter()
                    .find(|e| !out.iter().any(|(c, _)| same_condition(c, &e.condition)))
                {
                    return Err(HarnessError::Protocol(format!(
                        "count for {} matches no combination",
                        describe(&stray.condition)
                    )));
                }
                Ok(out)
            }
        }
    }

    /// Number of trials the protocol plans, without materializing them.
    pub fn planned_count(&self) -> Result<u64, HarnessError> {
        Ok(self.combinations()?.iter().map(|(_, n)| n).sum())
    }
}

fn same_condition(a: &Condition, b: &Condition) -> bool {
    a.len() == b.len() && a.iter().all(|(k, v)| b.get(k) == Some(v))
}

pub fn describe(c: &Condition) -> String {
    if c.is_empty() {
        return "{}".into();
    }
    let parts: Vec<String> = c.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial_id: u64, policy: SeedPolicy) -> u64 {
    match policy {
        SeedPolicy::PerTrial => splitmix64(master ^ splitmix64(trial_id)),
        SeedPolicy::Fixed => master,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlannedTrial {
    /// 1-based position in the plan.
    pub trial_id: u64,
    pub condition: Condition,
    /// 1-based repetition of this combination.
    pub rep: u64,
    pub seed: u64,
}

/// Expands a protocol: combinations in lexicographic factor order, each
/// repeated in place (reps innermost).
pub fn plan_trials(protocol: &ProtocolDef) -> Result<Vec<PlannedTrial>, HarnessError> {
    let mut out = Vec::new();
    for (condition, n) in protocol.combinations()? {
        for rep in 1..=n {
            let trial_id = out.len() as u64 + 1;
            out.push(PlannedTrial {
                trial_id,
                condition: condition.clone(),
                rep,
                seed: trial_seed(protocol.master_seed, trial_id, protocol.seed_policy),
            });
        }
    }
    Ok(out)
}
