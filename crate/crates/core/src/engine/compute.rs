use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{StateContext, SUCCEEDED};
use crate::types::Value;

/// A compute state body: reads and writes through the context, returns an outcome.
pub type ComputeFn = Arc<dyn Fn(&mut StateContext<'_>) -> Result<String, String> + Send + Sync>;

/// Named compute functions available to `compute` states.
#[derive(Clone, Default)]
pub struct ComputeRegistry {
    fns: BTreeMap<String, ComputeFn>,
}

impl fmt::Debug for ComputeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.fns.keys()).finish()
    }
}

impl ComputeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with `noop`, `branch` and `check_flag`.
    ///
    /// * `noop` returns `succeeded`.
    /// * `branch` returns the text held by its single input key.
    /// * `check_flag` returns `succeeded` if its single boolean input is true,
    ///   otherwise `failed`.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register("noop", |_| Ok(SUCCEEDED.to_owned()));
        r.register("branch", |ctx| {
            let key = single_input(ctx)?;
            let v = ctx.get(&key).map_err(|e| e.to_string())?;
            v.as_text()
                .map(str::to_owned)
                .ok_or_else(|| format!("`{key}` is {}, expected text", v.kind()))
        });
        r.register("check_flag", |ctx| {
            let key = single_input(ctx)?;
            match ctx.get(&key).map_err(|e| e.to_string())? {
                Value::Bool(true) => Ok(SUCCEEDED.to_owned()),
                Value::Bool(false) => Ok("failed".to_owned()),
                v => Err(format!("`{key}` is {}, expected bool", v.kind())),
            }
        });
        r
    }

    pub fn register<F>(&mut self, name: impl Into<String>, f: F)
    where
        F: Fn(&mut StateContext<'_>) -> Result<String, String> + Send + Sync + 'static,
    {
        self.fns.insert(name.into(), Arc::new(f));
    }

    pub fn get(&self, name: &str) -> Option<&ComputeFn> {
        self.fns.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.fns.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fns.keys().map(String::as_str)
    }
}

fn single_input(ctx: &StateContext<'_>) -> Result<String, String> {
    match ctx.input_keys() {
        [k] => Ok(k.clone()),
        keys => Err(format!("expects exactly one input key, got {}", keys.len())),
    }
}
