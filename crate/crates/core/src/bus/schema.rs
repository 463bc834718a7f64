//! Request and response schemas of every interface class.
//!
//! Messages are JSON objects whose fields carry the serde form of a core
//! type. Parsing is strict: unknown fields, missing required fields and
//! wrongly typed values are rejected with an error naming the field.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value as Json};

use super::InterfaceClass;
use crate::types::{Value, ValueKind};

/// Version of the message schemas shipped under `schemas/`.
pub const SCHEMA_VERSION: u32 = 1;

pub const DESCRIBE_OP: &str = "describe";

pub type Message = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy)]
pub struct Field {
    pub name: &'static str,
    pub kind: ValueKind,
    pub required: bool,
    pub doc: &'static str,
}

const fn req(name: &'static str, kind: ValueKind, doc: &'static str) -> Field {
    Field {
        name,
        kind,
        required: true,
        doc,
    }
}

const fn opt(name: &'static str, kind: ValueKind, doc: &'static str) -> Field {
    Field {
        name,
        kind,
        required: false,
        doc,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MessageSchema {
    pub fields: &'static [Field],
    /// Exactly one of these fields must be present.
    pub exactly_one_of: &'static [&'static str],
}

#[derive(Debug, Clone, Copy)]
pub struct OpSchema {
    pub op: &'static str,
    pub request: MessageSchema,
    pub response: MessageSchema,
}

use ValueKind as K;

const fn msg(fields: &'static [Field]) -> MessageSchema {
    MessageSchema {
        fields,
        exactly_one_of: &[],
    }
}

const APPARATUS_STATE: MessageSchema = msg(&[
    req(
        "door_angle",
        K::Float,
        "door opening in radians, 0 is closed",
    ),
    req(
        "drawer_extension",
        K::Float,
        "drawer extension in meters, 0 is closed",
    ),
    req(
        "objects_at_nominal",
        K::Bool,
        "every object rests exactly at its nominal pose",
    ),
]);

const GRASP_PLANNER: &[OpSchema] = &[OpSchema {
    op: "plan_grasps",
    request: MessageSchema {
        fields: &[
            opt("depth_image", K::DepthImage, "depth input"),
            opt(
                "point_cloud",
                K::PointCloud,
                "point cloud input, world frame",
            ),
            opt("object_model", K::ObjectModel, "object model input"),
            opt(
                "object_pose",
                K::Pose,
                "pose of the object model in the world",
            ),
            opt(
                "intrinsics",
                K::Intrinsics,
                "camera intrinsics of the depth image",
            ),
            opt(
                "camera_pose",
                K::Pose,
                "camera pose in the world; identity if absent",
            ),
            opt(
                "max_candidates",
                K::Int,
                "upper bound on returned grasps, at least 1",
            ),
            opt(
                "min_quality",
                K::Float,
                "drop candidates scoring below this",
            ),
        ],
        exactly_one_of: &["depth_image", "point_cloud", "object_model"],
    },
    response: MessageSchema {
        fields: &[
            opt("candidates", K::Candidates, "6-DoF grasp candidates"),
            opt("rectangles", K::Rectangles, "image-plane grasp rectangles"),
        ],
        exactly_one_of: &["candidates", "rectangles"],
    },
}];

const MOTION_PLANNER: &[OpSchema] = &[OpSchema {
    op: "plan_motion",
    request: msg(&[
        req("start", K::Joints, "start configuration"),
        req(
            "goal",
            K::Joints,
            "goal configuration, same joints as start",
        ),
        opt("steps", K::Int, "number of waypoints, at least 2"),
    ]),
    response: msg(&[req(
        "trajectory",
        K::Trajectory,
        "joint-space path from start to goal",
    )]),
}];

const PERCEPTION: &[OpSchema] = &[OpSchema {
    op: "filter_cloud",
    request: msg(&[
        req("point_cloud", K::PointCloud, "input cloud"),
        opt(
            "workspace_min",
            K::Vector3,
            "lower corner of the retained box",
        ),
        opt(
            "workspace_max",
            K::Vector3,
            "upper corner of the retained box",
        ),
        opt(
            "plane_tolerance",
            K::Float,
            "height above the support plane a point must exceed",
        ),
    ]),
    response: msg(&[req("point_cloud", K::PointCloud, "filtered cloud")]),
}];

const APPARATUS: &[OpSchema] = &[
    OpSchema {
        op: "status",
        request: msg(&[]),
        response: APPARATUS_STATE,
    },
    OpSchema {
        op: "reset_objects",
        request: msg(&[]),
        response: APPARATUS_STATE,
    },
    OpSchema {
        op: "reset_apparatus",
        request: msg(&[]),
        response: APPARATUS_STATE,
    },
    OpSchema {
        op: "operate_door",
        request: msg(&[req("angle", K::Float, "target door angle in [0, pi/2]")]),
        response: APPARATUS_STATE,
    },
    OpSchema {
        op: "operate_drawer",
        request: msg(&[req(
            "extension",
            K::Float,
            "target drawer extension in [0, 0.5]",
        )]),
        response: APPARATUS_STATE,
    },
];

const ROBOT_DRIVER: &[OpSchema] = &[
    OpSchema {
        op: "capture",
        request: msg(&[]),
        response: msg(&[
            req("depth_image", K::DepthImage, "rendered depth"),
            req(
                "point_cloud",
                K::PointCloud,
                "rendered cloud in the world frame",
            ),
            req("intrinsics", K::Intrinsics, "camera intrinsics"),
            req("camera_pose", K::Pose, "camera pose in the world"),
        ]),
    },
    OpSchema {
        op: "grasp_goal",
        request: msg(&[req("candidate", K::Candidate, "grasp to reach")]),
        response: msg(&[
            req("start", K::Joints, "current configuration"),
            req("goal", K::Joints, "configuration at the grasp"),
        ]),
    },
    OpSchema {
        op: "execute_trajectory",
        request: msg(&[req("trajectory", K::Trajectory, "path to follow")]),
        response: msg(&[req("joints", K::Joints, "configuration after execution")]),
    },
    OpSchema {
        op: "execute_grasp",
        request: msg(&[
            req("candidate", K::Candidate, "grasp to execute"),
            opt("target_object", K::Text, "object the grasp aims at"),
        ]),
        response: msg(&[
            req("grasp_success", K::Bool, "whether the object ended up held"),
            req("failure_reason", K::Text, "empty on success"),
        ]),
    },
    OpSchema {
        op: "open_door",
        request: msg(&[req("angle", K::Float, "door angle to open to")]),
        response: msg(&[req("door_angle", K::Float, "resulting door angle")]),
    },
    OpSchema {
        op: "open_drawer",
        request: msg(&[req("extension", K::Float, "drawer extension to pull to")]),
        response: msg(&[req(
            "drawer_extension",
            K::Float,
            "resulting drawer extension",
        )]),
    },
];

pub fn operations(interface: InterfaceClass) -> &'static [OpSchema] {
    match interface {
        InterfaceClass::GraspPlanner => GRASP_PLANNER,
        InterfaceClass::MotionPlanner => MOTION_PLANNER,
        InterfaceClass::Perception => PERCEPTION,
        InterfaceClass::Apparatus => APPARATUS,
        InterfaceClass::RobotDriver => ROBOT_DRIVER,
    }
}

pub fn op_schema(interface: InterfaceClass, op: &str) -> Option<&'static OpSchema> {
    operations(interface).iter().find(|s| s.op == op)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolError {
    pub field: Option<String>,
    pub message: String,
}

impl ProtocolError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ProtocolError {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ProtocolError {
            field: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "field `{field}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ProtocolError {}

fn lookup(interface: InterfaceClass, op: &str) -> Result<&'static OpSchema, ProtocolError> {
    op_schema(interface, op).ok_or_else(|| {
        ProtocolError::general(format!("interface {interface} has no operation `{op}`"))
    })
}

pub fn parse_request(
    interface: InterfaceClass,
    op: &str,
    payload: &Json,
) -> Result<Message, ProtocolError> {
    if op == DESCRIBE_OP {
        return parse_message(&msg(&[]), payload);
    }
    let m = parse_message(&lookup(interface, op)?.request, payload)?;
    check_ranges(&m)?;
    Ok(m)
}

pub fn parse_response(
    interface: InterfaceClass,
    op: &str,
    payload: &Json,
) -> Result<Message, ProtocolError> {
    parse_message(&lookup(interface, op)?.response, payload)
}

/// Parses a `describe` response into the descriptor contract it announces.
pub fn parse_contract(payload: &Json) -> Result<Json, ProtocolError> {
    let obj = payload
        .as_object()
        .ok_or_else(|| ProtocolError::general("payload must be a JSON object"))?;
    for (k, _) in obj {
        if !["id", "interface", "accepted_inputs", "output_kind"].contains(&k.as_str()) {
            return Err(ProtocolError::field(k.clone(), "unknown field"));
        }
    }
    let mut d: super::ComponentDescriptor = serde_json::from_value(payload.clone())
        .map_err(|e| ProtocolError::general(format!("invalid describe response: {e}")))?;
    d.transport = super::Transport::InProcess;
    Ok(d.contract())
}

fn check_ranges(m: &Message) -> Result<(), ProtocolError> {
    if let Some(Value::Int(n)) = m.get("max_candidates") {
        if *n < 1 {
            return Err(ProtocolError::field(
                "max_candidates",
                format!("must be at least 1, got {n}"),
            ));
        }
    }
    if let Some(Value::Int(n)) = m.get("steps") {
        if *n < 2 {
            return Err(ProtocolError::field(
                "steps",
                format!("must be at least 2, got {n}"),
            ));
        }
    }
    Ok(())
}

pub fn parse_message(schema: &MessageSchema, payload: &Json) -> Result<Message, ProtocolError> {
    let obj = payload
        .as_object()
        .ok_or_else(|| ProtocolError::general("payload must be a JSON object"))?;
    let mut out = Message::new();
    for (k, v) in obj {
        let field = schema
            .fields
            .iter()
            .find(|f| f.name == k)
            .ok_or_else(|| ProtocolError::field(k.clone(), "unknown field"))?;
        let value = Value::from_json(field.kind, v).map_err(|e| {
            ProtocolError::field(k.clone(), format!("expected {}: {e}", field.kind))
        })?;
        out.insert(k.clone(), value);
    }
    for f in schema.fields.iter().filter(|f| f.required) {
        if !out.contains_key(f.name) {
            return Err(ProtocolError::field(f.name, "required field is missing"));
        }
    }
    if !schema.exactly_one_of.is_empty() {
        let present: Vec<&str> = schema
            .exactly_one_of
            .iter()
            .copied()
            .filter(|f| out.contains_key(*f))
            .collect();
        if present.len() != 1 {
            let field = present.get(1).copied().unwrap_or(schema.exactly_one_of[0]);
            return Err(ProtocolError::field(
                field,
                format!(
                    "exactly one of {} is required, found {}",
                    schema.exactly_one_of.join(", "),
                    present.len()
                ),
            ));
        }
    }
    Ok(out)
}

pub fn encode_message(m: &Message) -> Json {
    Json::Object(m.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
}

fn message_doc(m: &MessageSchema) -> Json {
    let fields: Map<String, Json> = m
        .fields
        .iter()
        .map(|f| {
            (
                f.name.to_owned(),
                json!({ "type": f.kind, "required": f.required, "doc": f.doc }),
            )
        })
        .collect();
    let mut v = json!({ "fields": fields });
    if !m.exactly_one_of.is_empty() {
        v["exactly_one_of"] = json!(m.exactly_one_of);
    }
    v
}

/// The versioned schema document of one interface class.
pub fn schema_document(interface: InterfaceClass) -> Json {
    let mut ops = Map::new();
    ops.insert(
        DESCRIBE_OP.to_owned(),
        json!({
            "request": { "fields": {} },
            "response": {
                "fields": {
                    "id": { "type": "text", "required": true, "doc": "component id" },
                    "interface": { "type": "text", "required": true, "doc": "interface class name" },
                    "accepted_inputs": { "type": "text_list", "required": false, "doc": "grasp planners only" },
                    "output_kind": { "type": "text", "required": false, "doc": "rectangle, pose or pose_with_quality" }
                }
            }
        }),
    );
    for s in operations(interface) {
        ops.insert(
            s.op.to_owned(),
            json!({ "request": message_doc(&s.request), "response": message_doc(&s.response) }),
        );
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "interface": interface,
        "default_op": interface.default_op(),
        "operations": ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grasp_request_needs_exactly_one_input() {
        let e = parse_request(InterfaceClass::GraspPlanner, "plan_grasps", &json!({})).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("depth_image"));
        let cloud = json!({"frame": "world", "points": []});
        let both = json!({"point_cloud": cloud, "object_model": {"name": "b", "footprint": [[0,0],[1,0],[0,1]], "height": 0.1}});
        let e = parse_request(InterfaceClass::GraspPlanner, "plan_grasps", &both).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("object_model"));
        assert!(parse_request(
            InterfaceClass::GraspPlanner,
            "plan_grasps",
            &json!({"point_cloud": cloud})
        )
        .is_ok());
    }

    #[test]
    fn errors_name_the_offending_field() {
        let e = parse_request(
            InterfaceClass::MotionPlanner,
            "plan_motion",
            &json!({"start": {"a": 0.0}, "goal": "x"}),
        )
        .unwrap_err();
        assert_eq!(e.field.as_deref(), Some("goal"));
        let e = parse_response(
            InterfaceClass::Perception,
            "filter_cloud",
            &json!({"cloud": []}),
        )
        .unwrap_err();
        assert_eq!(e.field.as_deref(), Some("cloud"));
        let e = parse_request(
            InterfaceClass::GraspPlanner,
            "plan_grasps",
            &json!({
                "point_cloud": {"frame": "w", "points": []}, "max_candidates": 0
            }),
        )
        .unwrap_err();
        assert_eq!(e.field.as_deref(), Some("max_candidates"));
        assert!(parse_request(InterfaceClass::Apparatus, "fly", &json!({})).is_err());
    }

    #[test]
    fn every_interface_has_a_document() {
        for i in InterfaceClass::ALL {
            let d = schema_document(i);
            assert_eq!(d["interface"], json!(i.name()));
            assert!(d["operations"]["describe"].is_object());
        }
    }
}
