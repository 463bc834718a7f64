//! Reference components: two grasp planners covering both output families,
//! a straight-line motion planner and a plane-removing cloud filter.
//!
//! All of them are pure functions of their request and are registered
//! in-process by [`default_registry`].

mod centroid_rect;
mod motion;
mod perception;
mod plane;
mod select;
mod top_surface;

pub use centroid_rect::{centroid_rect_plan, CentroidRectConfig};
pub use motion::{straight_line_plan, DEFAULT_STEPS};
pub use perception::{crop_and_remove_plane, DEFAULT_PLANE_TOLERANCE};
pub use plane::{principal_angle, support_plane_height};
pub use select::{select_candidate, SelectPolicy};
pub use top_surface::{cluster_points, top_surface_plan, TopSurfaceConfig};

use std::sync::Arc;

use serde_json::Value as Json;

use crate::bus::{
    Component, ComponentDescriptor, ComponentError, InputKind, InterfaceClass, Message, OutputKind,
    Registry,
};
use crate::engine::{ComputeRegistry, StateContext};
use crate::types::{Value, ValueKind};

pub const TOP_SURFACE_ID: &str = "top_surface";
pub const CENTROID_RECT_ID: &str = "centroid_rect";
pub const LINE_MOTION_ID: &str = "line_motion";
pub const PLANE_CROP_ID: &str = "plane_crop";

pub const NO_CANDIDATE: &str = "no_candidate";

fn limits(request: &Message, default_max: usize) -> (usize, f64) {
    let max = match request.get("max_candidates") {
        Some(Value::Int(n)) => usize::try_from(*n).unwrap_or(default_max),
        _ => default_max,
    };
    let min = request
        .get("min_quality")
        .and_then(Value::as_f64)
        .unwrap_or(0.0);
    (max, min)
}

fn single(key: &str, v: Value) -> Message {
    Message::from([(key.to_owned(), v)])
}

/// Point-cloud planner emitting scored 6-DoF candidates.
pub struct TopSurface {
    descriptor: ComponentDescriptor,
}

impl Default for TopSurface {
    fn default() -> Self {
        TopSurface {
            descriptor: ComponentDescriptor::grasp_planner(
                TOP_SURFACE_ID,
                &[InputKind::PointCloud],
                OutputKind::PoseWithQuality,
            ),
        }
    }
}

impl Component for TopSurface {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.descriptor
    }

    fn handle(&self, _op: &str, request: &Message) -> Result<Message, ComponentError> {
        let Some(Value::PointCloud(cloud)) = request.get("point_cloud") else {
            return Err(ComponentError::new("point_cloud input required"));
        };
        let defaults = TopSurfaceConfig::default();
        let (max_candidates, min_quality) = limits(request, defaults.max_candidates);
        let cfg = TopSurfaceConfig {
            max_candidates,
            min_quality,
            ..defaults
        };
        Ok(single(
            "candidates",
            Value::Candidates(top_surface_plan(cloud, &cfg)),
        ))
    }
}

/// Depth-image planner emitting grasp rectangles.
pub struct CentroidRect {
    descriptor: ComponentDescriptor,
}

impl Default for CentroidRect {
    fn default() -> Self {
        CentroidRect {
            descriptor: ComponentDescriptor::grasp_planner(
                CENTROID_RECT_ID,
                &[InputKind::DepthImage],
                OutputKind::Rectangle,
            ),
        }
    }
}

impl Component for CentroidRect {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.descriptor
    }

    fn handle(&self, _op: &str, request: &Message) -> Result<Message, ComponentError> {
        let Some(Value::DepthImage(depth)) = request.get("depth_image") else {
            return Err(ComponentError::new("depth_image input required"));
        };
        let defaults = CentroidRectConfig::default();
        let (max_candidates, min_quality) = limits(request, defaults.max_candidates);
        let cfg = CentroidRectConfig {
            max_candidates,
            min_quality,
            ..defaults
        };
        Ok(single(
            "rectangles",
            Value::Rectangles(centroid_rect_plan(depth, &cfg)),
        ))
    }
}

pub struct LineMotion {
    descriptor: ComponentDescriptor,
}

impl Default for LineMotion {
    fn default() -> Self {
        LineMotion {
            descriptor: ComponentDescriptor::new(LINE_MOTION_ID, InterfaceClass::MotionPlanner),
        }
    }
}

impl Component for LineMotion {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.descriptor
    }

    fn handle(&self, _op: &str, request: &Message) -> Result<Message, ComponentError> {
        let (Some(Value::Joints(start)), Some(Value::Joints(goal))) =
            (request.get("start"), request.get("goal"))
        else {
            return Err(ComponentError::new("start and goal required"));
        };
        let steps = match request.get("steps") {
            Some(Value::Int(n)) => {
                usize::try_from(*n).map_err(|_| ComponentError::new("steps out of range"))?
            }
            _ => DEFAULT_STEPS,
        };
        let t = straight_line_plan(start, goal, steps)
            .map_err(|e| ComponentError::new(e.to_string()))?;
        Ok(single("trajectory", Value::Trajectory(t)))
    }
}

pub struct PlaneCrop {
    descriptor: ComponentDescriptor,
}

impl Default for PlaneCrop {
    fn default() -> Self {
        PlaneCrop {
            descriptor: ComponentDescriptor::new(PLANE_CROP_ID, InterfaceClass::Perception),
        }
    }
}

impl Component for PlaneCrop {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.descriptor
    }

    fn handle(&self, _op: &str, request: &Message) -> Result<Message, ComponentError> {
        let Some(Value::PointCloud(cloud)) = request.get("point_cloud") else {
            return Err(ComponentError::new("point_cloud required"));
        };
        let corner = |key: &str, fill: f64| match request.get(key) {
            Some(Value::Vector3(v)) => *v,
            _ => [fill; 3],
        };
        let tolerance = request
            .get("plane_tolerance")
            .and_then(Value::as_f64)
            .unwrap_or(DEFAULT_PLANE_TOLERANCE);
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(ComponentError::new("plane_tolerance must be positive"));
        }
        let out = crop_and_remove_plane(
            cloud,
            corner("workspace_min", f64::MIN),
            corner("workspace_max", f64::MAX),
            tolerance,
        );
        Ok(single("point_cloud", Value::PointCloud(out)))
    }
}

/// The four reference components, in-process.
pub fn reference_components() -> Vec<Arc<dyn Component>> {
    vec![
        Arc::new(TopSurface::default()),
        Arc::new(CentroidRect::default()),
        Arc::new(LineMotion::default()),
        Arc::new(PlaneCrop::default()),
    ]
}

/// A registry holding the reference components.
pub fn default_registry() -> Registry {
    let r = Registry::new();
    for c in reference_components() {
        r.register(c)
            .expect("reference descriptors are valid and distinct");
    }
    r
}

/// The reference component with this id, if any.
pub fn reference_component(id: &str) -> Option<Arc<dyn Component>> {
    reference_components()
        .into_iter()
        .find(|c| c.descriptor().id == id)
}

fn select_state(ctx: &mut StateContext<'_>) -> Result<String, String> {
    let policy: SelectPolicy = match ctx.config().get("policy") {
        None => SelectPolicy::default(),
        Some(Json::String(s)) => s.parse()?,
        Some(other) => return Err(format!("policy must be a string, got {other}")),
    };
    let reference = match ctx.config().get("reference") {
        None => [0.0; 3],
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| format!("reference: {e}"))?,
    };
    let key = ctx
        .input_keys()
        .first()
        .cloned()
        .ok_or("select_candidate needs a candidates input")?;
    let out = ctx
        .output_keys()
        .first()
        .cloned()
        .ok_or("select_candidate needs a candidate output")?;
    let Value::Candidates(list) = ctx
        .get_kind(&key, ValueKind::Candidates)
        .map_err(|e| e.to_string())?
    else {
        unreachable!("kind checked")
    };
    match select_candidate(list, policy, reference) {
        Some(i) => {
            let chosen = list[i].clone();
            ctx.set(&out, Value::Candidate(chosen))
                .map_err(|e| e.to_string())?;
            Ok(crate::engine::SUCCEEDED.to_owned())
        }
        None => Ok(NO_CANDIDATE.to_owned()),
    }
}

/// Builtins plus `select_candidate` (policy in config `policy`, first input
/// is the list, first output receives the choice; outcomes `succeeded` and
/// `no_candidate`) and `check_grasp`, an alias of `check_flag`.
pub fn compute_registry() -> ComputeRegistry {
    let mut r = ComputeRegistry::with_builtins();
    r.register("select_candidate", select_state);
    let check = r.get("check_flag").cloned().expect("builtin");
    r.register("check_grasp", move |ctx| check(ctx));
    r
}
