use std::collections::BTreeMap;

use serde_json::Value as Json;
use thiserror::Error;

use crate::types::{Value, ValueKind};

/// The blackboard shared by the states of one execution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Userdata(BTreeMap<String, Value>);

impl Userdata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: Value) -> Self {
        self.0.insert(key.into(), value);
        self
    }

    pub fn insert(&mut self, key: impl Into<String>, value: Value) -> Option<Value> {
        self.0.insert(key.into(), value)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_json(&self) -> Json {
        Json::Object(
            self.0
                .iter()
                .map(|(k, v)| (k.clone(), v.to_json()))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("state `{state}` read undeclared key `{key}`")]
    UndeclaredRead { state: String, key: String },
    #[error("state `{state}` wrote undeclared key `{key}`")]
    UndeclaredWrite { state: String, key: String },
    #[error("state `{state}` needs input `{key}`, which is not set")]
    Missing { state: String, key: String },
    #[error("state `{state}` input `{key}` is {found}, expected {expected}")]
    WrongKind {
        state: String,
        key: String,
        expected: ValueKind,
        found: ValueKind,
    },
}

/// A state's window onto the blackboard.
///
/// Reads are limited to the declared inputs; writes are staged and limited
/// to the declared outputs. The engine commits staged writes only when the
/// state completes without preemption.
pub struct StateContext<'a> {
    state: &'a str,
    userdata: &'a Userdata,
    inputs: &'a [String],
    outputs: &'a [String],
    config: &'a BTreeMap<String, Json>,
    staged: BTreeMap<String, Value>,
}

impl<'a> StateContext<'a> {
    pub fn new(
        state: &'a str,
        userdata: &'a Userdata,
        inputs: &'a [String],
        outputs: &'a [String],
        config: &'a BTreeMap<String, Json>,
    ) -> Self {
        StateContext {
            state,
            userdata,
            inputs,
            outputs,
            config,
            staged: BTreeMap::new(),
        }
    }

    pub fn state(&self) -> &str {
        self.state
    }

    /// Resolved configuration of the state.
    pub fn config(&self) -> &BTreeMap<String, Json> {
        self.config
    }

    pub fn input_keys(&self) -> &[String] {
        self.inputs
    }

    pub fn output_keys(&self) -> &[String] {
        self.outputs
    }

    /// Reads a declared input; `Ok(None)` if it is declared but unset.
    pub fn try_get(&self, key: &str) -> Result<Option<&Value>, KeyError> {
        if !self.inputs.iter().any(|k| k == key) {
            return Err(KeyError::UndeclaredRead {
                state: self.state.to_owned(),
                key: key.to_owned(),
            });
        }
        Ok(self.userdata.get(key))
    }

    pub fn get(&self, key: &str) -> Result<&Value, KeyError> {
        self.try_get(key)?.ok_or_else(|| KeyError::Missing {
            state: self.state.to_owned(),
            key: key.to_owned(),
        })
    }

    pub fn get_kind(&self, key: &str, kind: ValueKind) -> Result<&Value, KeyError> {
        let v = self.get(key)?;
        if v.kind() != kind {
            return Err(KeyError::WrongKind {
                state: self.state.to_owned(),
                key: key.to_owned(),
                expected: kind,
                found: v.kind(),
            });
        }
        Ok(v)
    }

    /// All declared inputs that are currently set.
    pub fn present_inputs(&self) -> BTreeMap<String, Value> {
        self.inputs
            .iter()
            .filter_map(|k| self.userdata.get(k).map(|v| (k.clone(), v.clone())))
            .collect()
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<(), KeyError> {
        if !self.outputs.iter().any(|k| k == key) {
            return Err(KeyError::UndeclaredWrite {
                state: self.state.to_owned(),
                key: key.to_owned(),
            });
        }
        self.staged.insert(key.to_owned(), value);
        Ok(())
    }

    pub(crate) fn into_staged(self) -> BTreeMap<String, Value> {
        self.staged
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_enforces_declared_keys() {
        let ud = Userdata::new()
            .with("a", Value::Int(1))
            .with("b", Value::Int(2));
        let (inputs, outputs, config) =
            (vec!["a".to_owned()], vec!["c".to_owned()], BTreeMap::new());
        let mut ctx = StateContext::new("s", &ud, &inputs, &outputs, &config);
        assert_eq!(ctx.get("a").unwrap(), &Value::Int(1));
        assert!(matches!(ctx.get("b"), Err(KeyError::UndeclaredRead { .. })));
        assert!(matches!(
            ctx.set("a", Value::Int(3)),
            Err(KeyError::UndeclaredWrite { .. })
        ));
        ctx.set("c", Value::Int(4)).unwrap();
        assert!(matches!(
            ctx.get_kind("a", ValueKind::Text),
            Err(KeyError::WrongKind { .. })
        ));
        assert_eq!(ctx.into_staged().len(), 1);
    }
}
