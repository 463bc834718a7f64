use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::BusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceClass {
    GraspPlanner,
    MotionPlanner,
    Perception,
    Apparatus,
    RobotDriver,
}

impl InterfaceClass {
    pub const ALL: [InterfaceClass; 5] = [
        InterfaceClass::GraspPlanner,
        InterfaceClass::MotionPlanner,
        InterfaceClass::Perception,
        InterfaceClass::Apparatus,
        InterfaceClass::RobotDriver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterfaceClass::GraspPlanner => "grasp_planner",
            InterfaceClass::MotionPlanner => "motion_planner",
            InterfaceClass::Perception => "perception",
            InterfaceClass::Apparatus => "apparatus",
            InterfaceClass::RobotDriver => "robot_driver",
        }
    }

    /// Operation used when a state names no operation.
    pub fn default_op(self) -> Option<&'static str> {
        match self {
            InterfaceClass::GraspPlanner => Some("plan_grasps"),
            InterfaceClass::MotionPlanner => Some("plan_motion"),
            InterfaceClass::Perception => Some("filter_cloud"),
            InterfaceClass::Apparatus | InterfaceClass::RobotDriver => None,
        }
    }
}

impl fmt::Display for InterfaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sensor or model input a grasp planner can consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    DepthImage,
    PointCloud,
    ObjectModel,
}

impl InputKind {
    pub const ALL: [InputKind; 3] = [
        InputKind::DepthImage,
        InputKind::PointCloud,
        InputKind::ObjectModel,
    ];

    /// Request field (and userdata key) carrying this input.
    pub fn field(self) -> &'static str {
        match self {
            InputKind::DepthImage => "depth_image",
            InputKind::PointCloud => "point_cloud",
            InputKind::ObjectModel => "object_model",
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.field())
    }
}

/// Native output family of a grasp planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// Image-plane rectangles, deprojected by the bus.
    Rectangle,
    /// 6-DoF poses, scored or not.
    Pose,
    /// 6-DoF poses, each carrying a quality.
    PoseWithQuality,
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputKind::Rectangle => "rectangle",
            OutputKind::Pose => "pose",
            OutputKind::PoseWithQuality => "pose_with_quality",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transport {
    #[default]
    InProcess,
    /// `host:port` of a component server.
    Socket { endpoint: String },
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::InProcess => f.write_str("in_process"),
            Transport::Socket { endpoint } => write!(f, "socket {endpoint}"),
        }
    }
}

/// What a component is, what it consumes and what it emits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDescriptor {
    pub id: String,
    pub interface: InterfaceClass,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accepted_inputs: Vec<InputKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_kind: Option<OutputKind>,
    #[serde(default)]
    pub transport: Transport,
    /// In-process components that are not reentrant are serialized by the bus.
    #[serde(default = "default_true")]
    pub reentrant: bool,
}

fn default_true() -> bool {
    true
}

impl ComponentDescriptor {
    pub fn new(id: impl Into<String>, interface: InterfaceClass) -> Self {
        ComponentDescriptor {
            id: id.into(),
            interface,
            accepted_inputs: Vec::new(),
            output_kind: None,
            transport: Transport::InProcess,
            reentrant: true,
        }
    }

    pub fn grasp_planner(
        id: impl Into<String>,
        accepted: &[InputKind],
        output: OutputKind,
    ) -> Self {
        ComponentDescriptor {
            accepted_inputs: accepted.to_vec(),
            output_kind: Some(output),
            ..Self::new(id, InterfaceClass::GraspPlanner)
        }
    }

    pub fn with_transport(mut self, transport: Transport) -> Self {
        self.transport = transport;
        self
    }

    pub fn accepts(&self, kind: InputKind) -> bool {
        self.accepted_inputs.contains(&kind)
    }

    pub fn validate(&self) -> Result<(), BusError> {
        let bad = |m: String| {
            Err(BusError::InvalidDescriptor {
                id: self.id.clone(),
                message: m,
            })
        };
        if self.id.is_empty() || self.id.chars().any(char::is_whitespace) {
            return bad("id must be a non-empty identifier".into());
        }
        let mut seen = Vec::new();
        for k in &self.accepted_inputs {
            if seen.contains(k) {
                return bad(format!("accepted input `{k}` is listed twice"));
            }
            seen.push(*k);
        }
        match self.interface {
            InterfaceClass::GraspPlanner => {
                if self.accepted_inputs.is_empty() {
                    return bad("a grasp planner must accept at least one input kind".into());
                }
                if self.output_kind.is_none() {
                    return bad("a grasp planner must declare an output kind".into());
                }
                if self.output_kind == Some(OutputKind::Rectangle)
                    && !self.accepts(InputKind::DepthImage)
                {
                    return bad("rectangle output needs a depth image to deproject against".into());
                }
            }
            other => {
                if !self.accepted_inputs.is_empty() || self.output_kind.is_some() {
                    return bad(format!(
                        "accepted_inputs and output_kind apply only to grasp planners, not {other}"
                    ));
                }
            }
        }
        if let Transport::Socket { endpoint } = &self.transport {
            if !endpoint.contains(':') {
                return bad(format!("endpoint `{endpoint}` is not host:port"));
            }
        }
        Ok(())
    }

    /// The transport-independent part, as answered by the `describe` operation.
    pub fn contract(&self) -> Json {
        let mut v = json!({ "id": self.id, "interface": self.interface });
        if !self.accepted_inputs.is_empty() {
            v["accepted_inputs"] = json!(self.accepted_inputs);
        }
        if let Some(k) = self.output_kind {
            v["output_kind"] = json!(k);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_invariants() {
        let ok =
            ComponentDescriptor::grasp_planner("p", &[InputKind::PointCloud], OutputKind::Pose);
        assert!(ok.validate().is_ok());
        assert!(
            ComponentDescriptor::grasp_planner("p", &[], OutputKind::Pose)
                .validate()
                .is_err()
        );
        assert!(ComponentDescriptor::grasp_planner(
            "p",
            &[InputKind::PointCloud],
            OutputKind::Rectangle
        )
        .validate()
        .is_err());
        let mut m = ComponentDescriptor::new("m", InterfaceClass::MotionPlanner);
        assert!(m.validate().is_ok());
        m.output_kind = Some(OutputKind::Pose);
        assert!(m.validate().is_err());
    }

    #[test]
    fn descriptor_json_form() {
        let d =
            ComponentDescriptor::grasp_planner("ext", &[InputKind::PointCloud], OutputKind::Pose)
                .with_transport(Transport::Socket {
                    endpoint: "127.0.0.1:9000".into(),
                });
        let j = serde_json::to_value(&d).unwrap();
        assert_eq!(
            j["transport"],
            json!({"kind": "socket", "endpoint": "127.0.0.1:9000"})
        );
        let back: ComponentDescriptor = serde_json::from_value(j).unwrap();
        assert_eq!(back, d);
        assert_eq!(
            d.contract(),
            json!({"id": "ext", "interface": "grasp_planner", "accepted_inputs": ["point_cloud"], "output_kind": "pose"})
        );
    }
}
