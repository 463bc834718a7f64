//! The checks that license a component to fill a binding slot.
//!
//! [`run_conformance`] drives a component through golden fixtures rendered
//! from a noise-free simulated scene and reports every check separately, so
//! one failure never hides the others.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::bus::frame::Envelope;
use crate::bus::schema::{self, DESCRIBE_OP};
use crate::bus::{
    normalize_grasps, CallError, Component, ComponentDescriptor, InputKind, InterfaceClass,
    OutputKind, SocketClient,
};
use crate::sim::{render_cloud, render_depth, Embodiment, World};
use crate::types::{
    DepthImage, JointState, ObjectModel, PointCloud, Pose6DoF, Value, INVALID_DEPTH,
};

/// Where the component under test lives.
#[derive(Clone)]
pub enum Endpoint {
    InProcess(Arc<dyn Component>),
    /// `host:port` of a component server.
    Socket(String),
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::InProcess(c) => write!(f, "InProcess({})", c.descriptor().id),
            Endpoint::Socket(e) => write!(f, "Socket({e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConformanceReport {
    pub component: String,
    pub checks: Vec<Check>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "conformance of `{}`", self.component)?;
        for c in &self.checks {
            writeln!(
                f,
                "  {} {:<28} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConformanceOptions {
    /// Deadline for every single request; also the bound of the timeout check.
    pub timeout: Duration,
}

impl Default for ConformanceOptions {
    fn default() -> Self {
        ConformanceOptions {
            timeout: Duration::from_secs(10),
        }
    }
}

/// Requests built from one noise-free scene: a 6 cm box under the camera.
pub struct GoldenFixtures {
    pub depth: DepthImage,
    pub cloud: PointCloud,
    pub embodiment: Embodiment,
    pub model: ObjectModel,
    pub object_pose: Pose6DoF,
}

impl GoldenFixtures {
    pub fn new() -> Self {
        let embodiment = Embodiment::preset("arm_a").expect("shipped preset");
        let model = ObjectModel::cuboid("golden_box", 0.06, 0.06, 0.1).expect("valid box");
        let object_pose = Pose6DoF::identity().translated([0.45, 0.0, 0.0]);
        let mut world = World::new(embodiment.clone())
            .with_object(model.clone(), object_pose)
            .expect("one object");
        world.base_noise = 0.0;
        GoldenFixtures {
            depth: render_depth(&world, &embodiment),
            cloud: render_cloud(&world, &embodiment),
            embodiment,
            model,
            object_pose,
        }
    }

    /// A `plan_grasps` request carrying `kind` as its input.
    pub fn grasp_request(&self, kind: InputKind, empty: bool) -> Json {
        let e = &self.embodiment;
        match kind {
            InputKind::DepthImage => {
                let depth = if empty {
                    DepthImage::filled(e.image_width, e.image_height, INVALID_DEPTH, "camera")
                        .expect("sized image")
                } else {
                    self.depth.clone()
                };
                json!({
                    "depth_image": Value::DepthImage(depth).to_json(),
                    "intrinsics": Value::Intrinsics(e.intrinsics).to_json(),
                    "camera_pose": Value::Pose(e.camera_pose).to_json(),
                })
            }
            InputKind::PointCloud => {
                let cloud = if empty {
                    PointCloud::empty("world")
                } else {
                    self.cloud.clone()
                };
                json!({ "point_cloud": Value::PointCloud(cloud).to_json() })
            }
            InputKind::ObjectModel => json!({
                "object_model": Value::ObjectModel(self.model.clone()).to_json(),
                "object_pose": Value::Pose(self.object_pose).to_json(),
            }),
        }
    }
}

impl Default for GoldenFixtures {
    fn default() -> Self {
        Self::new()
    }
}

enum Conn {
    Local(Arc<dyn Component>),
    Remote(SocketClient),
}

impl Conn {
    fn call(&mut self, op: &str, payload: &Json, timeout: Duration) -> Result<Json, CallError> {
        match self {
            Conn::Local(c) => c
                .handle_json(op, payload)
                .map_err(|e| CallError::Failed(e.0)),
            Conn::Remote(client) => client.call(op, payload, timeout, None),
        }
    }
}

struct Run {
    checks: Vec<Check>,
}

impl Run {
    fn record(&mut self, name: impl Into<String>, result: Result<String, String>) {
        let (passed, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

fn output_form(kind: Option<OutputKind>, response: &crate::bus::Message) -> Result<String, String> {
    let (rects, cands) = (response.get("rectangles"), response.get("candidates"));
    match (kind, rects, cands) {
        (Some(OutputKind::Rectangle), Some(Value::Rectangles(r)), _) => {
            Ok(format!("{} rectangles", r.len()))
        }
        (Some(OutputKind::Pose), _, Some(Value::Candidates(c))) => {
            match c.iter().position(|c| c.quality().is_some()) {
                None => Ok(format!("{} unscored candidates", c.len())),
                Some(i) => Err(format!("declared pose but candidate {i} carries a quality")),
            }
        }
        (Some(OutputKind::PoseWithQuality), _, Some(Value::Candidates(c))) => {
            match c.iter().position(|c| c.quality().is_none()) {
                None => Ok(format!("{} scored candidates", c.len())),
                Some(i) => Err(format!(
                    "declared pose_with_quality but candidate {i} is unscored"
                )),
            }
        }
        (declared, _, _) => Err(format!(
            "declared {} but answered with {}",
            declared
                .map(|k| k.to_string())
                .unwrap_or_else(|| "nothing".into()),
            if rects.is_some() {
                "rectangles"
            } else {
                "candidates"
            }
        )),
    }
}

/// A read-only request per non-grasp interface.
fn probe_request(
    interface: InterfaceClass,
    fx: &GoldenFixtures,
) -> Option<(&'static str, Json, Json)> {
    let joints = |v: f64| {
        Value::Joints(JointState::new([("joint_1", v), ("joint_2", -v)]).expect("finite")).to_json()
    };
    match interface {
        InterfaceClass::MotionPlanner => Some((
            "plan_motion",
            json!({ "start": joints(0.0), "goal": joints(1.0), "steps": 5 }),
            json!({ "start": joints(0.25), "goal": joints(0.25) }),
        )),
        InterfaceClass::Perception => Some((
            "filter_cloud",
            json!({ "point_cloud": Value::PointCloud(fx.cloud.clone()).to_json() }),
            json!({ "point_cloud": Value::PointCloud(PointCloud::empty("world")).to_json() }),
        )),
        InterfaceClass::Apparatus => Some(("status", json!({}), json!({}))),
        InterfaceClass::RobotDriver => Some(("capture", json!({}), json!({}))),
        InterfaceClass::GraspPlanner => None,
    }
}

/// Runs every applicable check against the component behind `endpoint`.
///
/// * `describe`: the announced contract equals `descriptor`'s.
/// * per accepted input kind: `schema`, `output_kind`, `empty_input` and
///   `timeout` (the golden request is answered within the deadline).
/// * per undeclared input kind: `rejects_undeclared`.
/// * `rejects_invalid`: a request without any input is refused.
/// * sockets only: `id_match` on a raw envelope with an unusual id.
pub fn run_conformance(descriptor: &ComponentDescriptor, endpoint: &Endpoint) -> ConformanceReport {
    run_conformance_with(descriptor, endpoint, &ConformanceOptions::default())
}

pub fn run_conformance_with(
    descriptor: &ComponentDescriptor,
    endpoint: &Endpoint,
    options: &ConformanceOptions,
) -> ConformanceReport {
    let mut run = Run { checks: Vec::new() };
    if let Err(e) = descriptor.validate() {
        run.record("descriptor", Err(e.to_string()));
    }
    let fx = GoldenFixtures::new();
    let timeout = options.timeout;
    let mut conn = match endpoint {
        Endpoint::InProcess(c) => Conn::Local(c.clone()),
        Endpoint::Socket(addr) => Conn::Remote(SocketClient::new(addr.clone())),
    };
    let interface = descriptor.interface;

    let describe = conn
        .call(DESCRIBE_OP, &json!({}), timeout)
        .map_err(|e| e.to_string())
        .and_then(|r| {
            let got = schema::parse_contract(&r).map_err(|e| e.to_string())?;
            if got == descriptor.contract() {
                Ok(format!("{got}"))
            } else {
                Err(format!(
                    "announced {got}, declared {}",
                    descriptor.contract()
                ))
            }
        });
    run.record("describe", describe);

    if interface == InterfaceClass::GraspPlanner {
        for kind in InputKind::ALL {
            let golden = fx.grasp_request(kind, false);
            if !descriptor.accepts(kind) {
                let r = match conn.call("plan_grasps", &golden, timeout) {
                    Err(CallError::Failed(m)) => Ok(format!("refused: {m}")),
                    Err(e) => Err(format!("expected a component refusal, got {e}")),
                    Ok(_) => Err(format!(
                        "declaration mismatch: answered a {kind} request it does not declare"
                    )),
                };
                run.record(format!("rejects_undeclared[{kind}]"), r);
                continue;
            }
            let started = Instant::now();
            let raw = conn.call("plan_grasps", &golden, timeout);
            let elapsed = started.elapsed();
            run.record(
                format!("timeout[{kind}]"),
                match &raw {
                    Err(CallError::Timeout { after, .. }) => {
                        Err(format!("no answer within {after:?}"))
                    }
                    _ if elapsed > timeout => {
                        Err(format!("answered after {elapsed:?}, deadline {timeout:?}"))
                    }
                    _ => Ok(format!("answered in {} ms", elapsed.as_millis())),
                },
            );
            let parsed = raw.map_err(|e| e.to_string()).and_then(|r| {
                schema::parse_response(interface, "plan_grasps", &r)
                    .map_err(|e| format!("invalid response: {e}"))
            });
            let request = schema::parse_request(interface, "plan_grasps", &golden)
                .expect("golden requests are valid");
            run.record(
                format!("schema[{kind}]"),
                parsed.clone().and_then(|m| {
                    normalize_grasps(&request, m)
                        .map(|n| match n.get("candidates") {
                            Some(Value::Candidates(c)) => {
                                format!("{} candidates after normalization", c.len())
                            }
                            _ => "normalized".into(),
                        })
                        .map_err(|e| format!("normalization failed: {e}"))
                }),
            );
            run.record(
                format!("output_kind[{kind}]"),
                parsed.and_then(|m| output_form(descriptor.output_kind, &m)),
            );
            let empty = fx.grasp_request(kind, true);
            let r = if kind == InputKind::ObjectModel {
                Ok("not applicable: object models are never empty".into())
            } else {
                conn.call("plan_grasps", &empty, timeout)
                    .map_err(|e| e.to_string())
                    .and_then(|r| {
                        schema::parse_response(interface, "plan_grasps", &r)
                            .map(|_| "valid response".to_owned())
                            .map_err(|e| format!("invalid response: {e}"))
                    })
            };
            run.record(format!("empty_input[{kind}]"), r);
        }
        let r = match conn.call("plan_grasps", &json!({}), timeout) {
            Err(CallError::Failed(m)) => Ok(format!("refused: {m}")),
            Err(e) => Err(format!("expected a component refusal, got {e}")),
            Ok(_) => Err("answered a request without any input".into()),
        };
        run.record("rejects_invalid", r);
    } else if let Some((op, golden, empty)) = probe_request(interface, &fx) {
        let started = Instant::now();
        let raw = conn.call(op, &golden, timeout);
        let elapsed = started.elapsed();
        run.record(
            "timeout",
            match &raw {
                Err(CallError::Timeout { after, .. }) => Err(format!("no answer within {after:?}")),
                _ if elapsed > timeout => Err(format!("answered after {elapsed:?}")),
                _ => Ok(format!("answered in {} ms", elapsed.as_millis())),
            },
        );
        run.record(
            format!("schema[{op}]"),
            raw.map_err(|e| e.to_string()).and_then(|r| {
                schema::parse_response(interface, op, &r)
                    .map(|_| "valid response".into())
                    .map_err(|e| e.to_string())
            }),
        );
        run.record(
            "empty_input",
            conn.call(op, &empty, timeout)
                .map_err(|e| e.to_string())
                .and_then(|r| {
                    schema::parse_response(interface, op, &r)
                        .map(|_| "valid response".into())
                        .map_err(|e| e.to_string())
                }),
        );
        if interface != InterfaceClass::Apparatus && interface != InterfaceClass::RobotDriver {
            let r = match conn.call(op, &json!({ "unexpected": true }), timeout) {
                Err(CallError::Failed(m)) => Ok(format!("refused: {m}")),
                Err(e) => Err(format!("expected a component refusal, got {e}")),
                Ok(_) => Err("answered a request that violates the schema".into()),
            };
            run.record("rejects_invalid", r);
        }
    }

    if let Conn::Remote(client) = &mut conn {
        let id = 4_242_424_242;
        let r = client
            .exchange(
                &Envelope::from_json(id, DESCRIBE_OP, json!({})).expect("object payload"),
                timeout,
                None,
            )
            .map_err(|e| e.to_string())
            .and_then(|env| {
                if env.id == id {
                    Ok(format!("response id {id}"))
                } else {
                    Err(format!("response id {} for request id {id}", env.id))
                }
            });
        run.record("id_match", r);
    }

    ConformanceReport {
        component: descriptor.id.clone(),
        checks: run.checks,
    }
}
