use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde_json::Value as Json;

use super::schema::{self, Message, ProtocolError};
use super::{
    BusError, CallError, Component, ComponentDescriptor, InterfaceClass, SocketClient, Transport,
};
use crate::engine::PreemptHandle;
use crate::types::{rect_to_pose, GraspCandidate, Pose6DoF, Value};

enum Backend {
    Local {
        component: Arc<dyn Component>,
        gate: Option<Mutex<()>>,
    },
    Remote(Mutex<SocketClient>),
}

struct Entry {
    descriptor: ComponentDescriptor,
    backend: Backend,
}

/// Components resolvable by id.
///
/// Lookups may run concurrently; registration takes a write lock. Calls to
/// one socket component queue on its connection, and calls to a
/// non-reentrant in-process component queue on its gate.
#[derive(Default)]
pub struct Registry {
    entries: RwLock<BTreeMap<String, Arc<Entry>>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(self.descriptors().iter().map(|d| d.id.clone()))
            .finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(
        &self,
        descriptor: ComponentDescriptor,
        backend: Backend,
    ) -> Result<ComponentDescriptor, BusError> {
        descriptor.validate()?;
        let mut map = self.entries.write().unwrap_or_else(|p| p.into_inner());
        if map.contains_key(&descriptor.id) {
            return Err(BusError::DuplicateId(descriptor.id));
        }
        map.insert(
            descriptor.id.clone(),
            Arc::new(Entry {
                descriptor: descriptor.clone(),
                backend,
            }),
        );
        Ok(descriptor)
    }

    /// Registers an in-process component under its descriptor's id.
    pub fn register(&self, component: Arc<dyn Component>) -> Result<ComponentDescriptor, BusError> {
        let descriptor = component.descriptor().clone();
        if descriptor.transport != Transport::InProcess {
            return Err(BusError::InvalidDescriptor {
                id: descriptor.id,
                message: "an in-process component must declare the in_process transport".into(),
            });
        }
        let gate = (!descriptor.reentrant).then(|| Mutex::new(()));
        self.insert(descriptor, Backend::Local { component, gate })
    }

    /// Registers a socket component. Nothing is contacted until the first call.
    pub fn register_endpoint(
        &self,
        descriptor: ComponentDescriptor,
    ) -> Result<ComponentDescriptor, BusError> {
        let Transport::Socket { endpoint } = &descriptor.transport else {
            return Err(BusError::InvalidDescriptor {
                id: descriptor.id,
                message: "a socket component must declare a socket endpoint".into(),
            });
        };
        let client = SocketClient::new(endpoint.clone());
        self.insert(descriptor, Backend::Remote(Mutex::new(client)))
    }

    pub fn resolve(&self, id: &str) -> Option<ComponentDescriptor> {
        self.entry(id).map(|e| e.descriptor.clone())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entry(id).is_some()
    }

    pub fn descriptors(&self) -> Vec<ComponentDescriptor> {
        let map = self.entries.read().unwrap_or_else(|p| p.into_inner());
        map.values().map(|e| e.descriptor.clone()).collect()
    }

    fn entry(&self, id: &str) -> Option<Arc<Entry>> {
        self.entries
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
    }

    /// Transport-level call: no schema checks, no normalization.
    pub fn call_raw(
        &self,
        id: &str,
        op: &str,
        payload: &Json,
        timeout: Duration,
        cancel: Option<&PreemptHandle>,
    ) -> Result<Json, CallError> {
        let entry = self
            .entry(id)
            .ok_or_else(|| CallError::UnknownComponent(id.to_owned()))?;
        match &entry.backend {
            Backend::Local { component, gate } => {
                let _guard = gate
                    .as_ref()
                    .map(|g| g.lock().unwrap_or_else(|p| p.into_inner()));
                let started = Instant::now();
                let result = component.handle_json(op, payload);
                // in-process calls cannot be interrupted: late answers are discarded
                if started.elapsed() > timeout {
                    return Err(CallError::Timeout {
                        component: id.to_owned(),
                        after: timeout,
                    });
                }
                if cancel.is_some_and(PreemptHandle::is_preempted) {
                    return Err(CallError::Cancelled);
                }
                result.map_err(|e| CallError::Failed(e.0))
            }
            Backend::Remote(client) => {
                let mut client = client.lock().unwrap_or_else(|p| p.into_inner());
                client.call(op, payload, timeout, cancel)
            }
        }
    }

    /// Validated call. The request and the response are checked against the
    /// interface schema, and grasp planner output is normalized to candidates.
    pub fn call(
        &self,
        id: &str,
        op: &str,
        payload: &Json,
        timeout: Duration,
        cancel: Option<&PreemptHandle>,
    ) -> Result<Message, CallError> {
        let descriptor = self
            .resolve(id)
            .ok_or_else(|| CallError::UnknownComponent(id.to_owned()))?;
        let request = schema::parse_request(descriptor.interface, op, payload)?;
        let raw = self.call_raw(id, op, payload, timeout, cancel)?;
        let response = schema::parse_response(descriptor.interface, op, &raw)?;
        if descriptor.interface == InterfaceClass::GraspPlanner {
            return Ok(normalize_grasps(&request, response)?);
        }
        Ok(response)
    }
}

/// Converts a grasp planner response into the candidate form.
///
/// Rectangles are deprojected through the request's depth image and
/// intrinsics, placed by its camera pose (identity when absent).
pub fn normalize_grasps(
    request: &Message,
    mut response: Message,
) -> Result<Message, ProtocolError> {
    let Some(Value::Rectangles(rects)) = response.remove("rectangles") else {
        return Ok(response);
    };
    let Some(Value::DepthImage(depth)) = request.get("depth_image") else {
        return Err(ProtocolError::field(
            "rectangles",
            "rectangle output needs a depth_image request",
        ));
    };
    let Some(Value::Intrinsics(k)) = request.get("intrinsics") else {
        return Err(ProtocolError::field(
            "intrinsics",
            "required to deproject rectangle output",
        ));
    };
    let camera = match request.get("camera_pose") {
        Some(Value::Pose(p)) => *p,
        _ => Pose6DoF::identity(),
    };
    let mut out = Vec::with_capacity(rects.len());
    for (i, r) in rects.iter().enumerate() {
        let pose = rect_to_pose(r.rectangle(), depth, k, &camera)
            .map_err(|e| ProtocolError::field(format!("rectangles[{i}]"), e.to_string()))?;
        let c = GraspCandidate::new(pose, r.quality(), r.quality_kind())
            .map_err(|e| ProtocolError::field(format!("rectangles[{i}]"), e.to_string()))?;
        out.push(c);
    }
    response.insert("candidates".into(), Value::Candidates(out));
    Ok(response)
}
