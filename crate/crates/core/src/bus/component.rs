use serde_json::Value as Json;
use thiserror::Error;

use super::schema::{self, Message, DESCRIBE_OP};
use super::{ComponentDescriptor, InputKind, InterfaceClass};

/// Failure reported by a component; the message travels to the caller.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ComponentError(pub String);

impl ComponentError {
    pub fn new(message: impl Into<String>) -> Self {
        ComponentError(message.into())
    }
}

/// A service implementation reachable through the bus.
pub trait Component: Send + Sync {
    fn descriptor(&self) -> &ComponentDescriptor;

    /// Handles a request that already passed schema validation.
    fn handle(&self, op: &str, request: &Message) -> Result<Message, ComponentError>;

    /// Wire-level entry point used by every transport.
    ///
    /// Answers `describe`, validates the request against the interface
    /// schema, refuses grasp inputs outside `accepted_inputs`, then calls
    /// [`handle`](Component::handle).
    fn handle_json(&self, op: &str, payload: &Json) -> Result<Json, ComponentError> {
        let d = self.descriptor();
        if op == DESCRIBE_OP {
            return Ok(d.contract());
        }
        let request = schema::parse_request(d.interface, op, payload)
            .map_err(|e| ComponentError(format!("bad request: {e}")))?;
        if d.interface == InterfaceClass::GraspPlanner {
            for kind in InputKind::ALL {
                if request.contains_key(kind.field()) && !d.accepts(kind) {
                    return Err(ComponentError(format!(
                        "`{}` does not accept {kind} input",
                        d.id
                    )));
                }
            }
        }
        self.handle(op, &request)
            .map(|m| schema::encode_message(&m))
    }
}
