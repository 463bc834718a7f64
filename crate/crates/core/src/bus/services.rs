use std::collections::BTreeMap;
use std::time::Duration;

use serde_json::{Map, Value as Json};

use super::schema::op_schema;
use super::{InputKind, InterfaceClass, Registry, DEFAULT_TIMEOUT};
use crate::engine::{ServiceError, ServiceInvoker, ServiceOutput, ServiceRequest};

/// Which component fills a binding slot, and how long a call may take.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub component: String,
    pub timeout: Duration,
}

impl Binding {
    pub fn new(component: impl Into<String>) -> Self {
        Binding {
            component: component.into(),
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

/// Serves engine service states from registry components.
///
/// Request fields are filled from the state's inputs (userdata key = field
/// name) and then its configuration. For grasp planners only the first
/// accepted input kind the state has available is sent. Response fields the
/// state declares as outputs are written back under the same names.
pub struct BoundServices<'r> {
    registry: &'r Registry,
    bindings: BTreeMap<String, Binding>,
}

impl<'r> BoundServices<'r> {
    pub fn new(registry: &'r Registry) -> Self {
        BoundServices {
            registry,
            bindings: BTreeMap::new(),
        }
    }

    pub fn bind(mut self, slot: impl Into<String>, binding: Binding) -> Self {
        self.bindings.insert(slot.into(), binding);
        self
    }

    pub fn bindings(&self) -> &BTreeMap<String, Binding> {
        &self.bindings
    }

    pub fn registry(&self) -> &Registry {
        self.registry
    }
}

impl ServiceInvoker for BoundServices<'_> {
    fn call(&self, req: &ServiceRequest<'_>) -> Result<ServiceOutput, ServiceError> {
        let binding = self
            .bindings
            .get(req.slot)
            .ok_or_else(|| ServiceError::Unbound(req.slot.to_owned()))?;
        let descriptor = self.registry.resolve(&binding.component).ok_or_else(|| {
            ServiceError::Unbound(format!(
                "{} (component `{}` not registered)",
                req.slot, binding.component
            ))
        })?;
        let op = req
            .operation
            .or(descriptor.interface.default_op())
            .ok_or_else(|| {
                ServiceError::Protocol(format!(
                    "{} needs an explicit operation",
                    descriptor.interface
                ))
            })?;
        let schema = op_schema(descriptor.interface, op).ok_or_else(|| {
            ServiceError::Protocol(format!("{} has no operation `{op}`", descriptor.interface))
        })?;

        let mut payload = Map::new();
        let input_fields: Vec<&str> = InputKind::ALL.iter().map(|k| k.field()).collect();
        let is_grasp = descriptor.interface == InterfaceClass::GraspPlanner;
        if is_grasp {
            if let Some(kind) = descriptor
                .accepted_inputs
                .iter()
                .find(|k| req.inputs.contains_key(k.field()))
            {
                payload.insert(kind.field().to_owned(), req.inputs[kind.field()].to_json());
            }
        }
        for f in schema.request.fields {
            if is_grasp && input_fields.contains(&f.name) {
                continue;
            }
            if let Some(v) = req.inputs.get(f.name) {
                payload.insert(f.name.to_owned(), v.to_json());
            } else if let Some(v) = req.config.get(f.name) {
                payload.insert(f.name.to_owned(), v.clone());
            }
        }
        if let Some(k) = req
            .config
            .keys()
            .find(|k| !schema.request.fields.iter().any(|f| f.name == k.as_str()))
        {
            return Err(ServiceError::Protocol(format!(
                "config `{k}` is not a field of {op} requests"
            )));
        }

        let response = self.registry.call(
            &binding.component,
            op,
            &Json::Object(payload),
            binding.timeout,
            Some(req.cancel),
        )?;
        let values = response
            .into_iter()
            .filter(|(k, _)| req.output_keys.contains(k))
            .collect();
        Ok(ServiceOutput {
            outcome: None,
            values,
        })
    }
}
