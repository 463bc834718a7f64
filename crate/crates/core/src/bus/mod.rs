//! Component bus: typed interfaces, a registry, and in-process or socket
//! transports with one uniform request/response call.
//!
//! Grasp planner responses are normalized on the way back: rectangle
//! outputs are deprojected with [`rect_to_pose`](crate::types::rect_to_pose)
//! against the request's depth image, so callers always see candidates.

mod component;
mod descriptor;
pub mod frame;
mod registry;
pub mod schema;
mod services;
mod socket;

pub use component::{Component, ComponentError};
pub use descriptor::{ComponentDescriptor, InputKind, InterfaceClass, OutputKind, Transport};
pub use frame::{
    decode_frame, encode_frame, read_frame, write_frame, Envelope, FrameError, MAX_FRAME_LEN,
};
pub use registry::{normalize_grasps, Registry};
pub use schema::{Message, ProtocolError};
pub use services::{Binding, BoundServices};
pub use socket::{ComponentServer, ServerHandle, SocketClient};

use std::time::Duration;

use thiserror::Error;

use crate::engine::ServiceError;

/// Default per-call timeout.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BusError {
    #[error("component `{0}` is already registered")]
    DuplicateId(String),
    #[error("invalid descriptor for `{id}`: {message}")]
    InvalidDescriptor { id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CallError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("protocol error: {0}")]
    Protocol(ProtocolError),
    #[error("`{component}` did not answer within {after:?}")]
    Timeout { component: String, after: Duration },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("connection poisoned: {0}")]
    Poisoned(String),
    #[error("component failure: {0}")]
    Failed(String),
    #[error("call cancelled")]
    Cancelled,
}

impl From<ProtocolError> for CallError {
    fn from(e: ProtocolError) -> Self {
        CallError::Protocol(e)
    }
}

impl From<CallError> for ServiceError {
    fn from(e: CallError) -> Self {
        match e {
            CallError::UnknownComponent(id) => ServiceError::Unbound(id),
            CallError::Protocol(p) => ServiceError::Protocol(p.to_string()),
            e @ CallError::Timeout { .. } => ServiceError::Timeout(e.to_string()),
            CallError::Transport(m) => ServiceError::Transport(m),
            CallError::Poisoned(m) => ServiceError::Protocol(format!("connection poisoned: {m}")),
            CallError::Failed(m) => ServiceError::Failed(m),
            CallError::Cancelled => ServiceError::Cancelled,
        }
    }
}
