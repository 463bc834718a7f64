use std::sync::{Arc, Mutex, MutexGuard};

use super::render::{cloud_from_depth, render_depth};
use super::{attempt_grasp, GraspAttempt, World, NO_CONTACT};
use crate::bus::{Component, ComponentDescriptor, ComponentError, InterfaceClass, Message};
use crate::types::{GraspCandidate, JointState, Value};

/// A world shared by the simulated robot and apparatus of one execution.
pub type SharedWorld = Arc<Mutex<World>>;

pub const SIM_ROBOT_ID: &str = "sim_robot";
pub const SIM_APPARATUS_ID: &str = "sim_apparatus";

fn lock(world: &SharedWorld) -> MutexGuard<'_, World> {
    world.lock().unwrap_or_else(|p| p.into_inner())
}

fn field<'m>(request: &'m Message, name: &str) -> Result<&'m Value, ComponentError> {
    request
        .get(name)
        .ok_or_else(|| ComponentError::new(format!("missing `{name}`")))
}

fn float(request: &Message, name: &str) -> Result<f64, ComponentError> {
    field(request, name)?
        .as_f64()
        .ok_or_else(|| ComponentError::new(format!("`{name}` must be a number")))
}

fn candidate(request: &Message) -> Result<&GraspCandidate, ComponentError> {
    match field(request, "candidate")? {
        Value::Candidate(c) => Ok(c),
        _ => Err(ComponentError::new("`candidate` must be a grasp candidate")),
    }
}

fn err(e: impl ToString) -> ComponentError {
    ComponentError::new(e.to_string())
}

/// Simulated robot driver: sensing, placeholder kinematics, grasp execution
/// and door/drawer manipulation against a shared world.
pub struct SimRobot {
    descriptor: ComponentDescriptor,
    world: SharedWorld,
}

impl SimRobot {
    pub fn new(world: SharedWorld) -> Self {
        SimRobot {
            descriptor: ComponentDescriptor::new(SIM_ROBOT_ID, InterfaceClass::RobotDriver),
            world,
        }
    }

    /// Joint goal for a grasp pose: the first four joints carry azimuth,
    /// planar radius, height and yaw; the rest keep their home values.
    fn goal_for(world: &World, c: &GraspCandidate) -> JointState {
        let p = c.pose();
        let derived = [p.y.atan2(p.x), p.x.hypot(p.y), p.z, p.yaw];
        let home = &world.embodiment.home;
        let mut names: Vec<&str> = home.names().collect();
        names.sort_by_key(|n| {
            n.trim_start_matches("joint_")
                .parse::<usize>()
                .unwrap_or(usize::MAX)
        });
        let joints = names.iter().enumerate().map(|(i, n)| {
            (
                n.to_string(),
                derived
                    .get(i)
                    .copied()
                    .unwrap_or_else(|| home.get(n).unwrap_or(0.0)),
            )
        });
        JointState::new(joints).expect("derived joint values are finite")
    }
}

impl Component for SimRobot {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.descriptor
    }

    fn handle(&self, op: &str, request: &Message) -> Result<Message, ComponentError> {
        let mut world = lock(&self.world);
        let mut out = Message::new();
        match op {
            "capture" => {
                let e = world.embodiment.clone();
                let depth = render_depth(&world, &e);
                out.insert(
                    "point_cloud".into(),
                    Value::PointCloud(cloud_from_depth(&depth, &e)),
                );
                out.insert("depth_image".into(), Value::DepthImage(depth));
                out.insert("intrinsics".into(), Value::Intrinsics(e.intrinsics));
                out.insert("camera_pose".into(), Value::Pose(e.camera_pose));
            }
            "grasp_goal" => {
                let goal = Self::goal_for(&world, candidate(request)?);
                out.insert("start".into(), Value::Joints(world.joints.clone()));
                out.insert("goal".into(), Value::Joints(goal));
            }
            "execute_trajectory" => {
                let Some(Value::Trajectory(t)) = request.get("trajectory") else {
                    return Err(ComponentError::new("`trajectory` must be a trajectory"));
                };
                if !t.last().same_joints(&world.embodiment.home) {
                    return Err(ComponentError::new(format!(
                        "trajectory joints do not match embodiment `{}`",
                        world.embodiment.name
                    )));
                }
                world.joints = t.last().clone();
                out.insert("joints".into(), Value::Joints(world.joints.clone()));
            }
            "execute_grasp" => {
                let c = candidate(request)?;
                let target = match request.get("target_object").and_then(Value::as_text) {
                    Some(t) => Some(t.to_owned()),
                    None => nearest_visible(&world, c),
                };
                let (success, reason) = match target {
                    Some(target) => {
                        let attempt = GraspAttempt {
                            candidate: c.clone(),
                            embodiment: world.embodiment.name.clone(),
                            target,
                        };
                        let r = attempt_grasp(&mut world, &attempt).map_err(err)?;
                        (r.success, r.failure_reason.unwrap_or(""))
                    }
                    None => (false, NO_CONTACT),
                };
                out.insert("grasp_success".into(), Value::Bool(success));
                out.insert("failure_reason".into(), Value::Text(reason.into()));
            }
            "open_door" => {
                world.operate_door(float(request, "angle")?).map_err(err)?;
                out.insert("door_angle".into(), Value::Float(world.door_angle()));
            }
            "open_drawer" => {
                world
                    .operate_drawer(float(request, "extension")?)
                    .map_err(err)?;
                out.insert(
                    "drawer_extension".into(),
                    Value::Float(world.drawer_extension()),
                );
            }
            other => {
                return Err(ComponentError::new(format!(
                    "unsupported operation `{other}`"
                )))
            }
        }
        Ok(out)
    }
}

fn nearest_visible(world: &World, c: &GraspCandidate) -> Option<String> {
    let p = c.pose();
    world
        .visible_objects()
        .map(|(n, o)| {
            let cen = o.model.world_centroid(&o.pose);
            (n.to_owned(), (p.x - cen[0]).hypot(p.y - cen[1]))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, _)| n)
}

/// The object-reset, door and drawer apparatuses as one component.
pub struct SimApparatus {
    descriptor: ComponentDescriptor,
    world: SharedWorld,
}

impl SimApparatus {
    pub fn new(world: SharedWorld) -> Self {
        SimApparatus {
            descriptor: ComponentDescriptor::new(SIM_APPARATUS_ID, InterfaceClass::Apparatus),
            world,
        }
    }
}

impl Component for SimApparatus {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.descriptor
    }

    fn handle(&self, op: &str, request: &Message) -> Result<Message, ComponentError> {
        let mut world = lock(&self.world);
        match op {
            "status" => {}
            "reset_objects" => world.reset_objects(),
            "reset_apparatus" => world.reset_apparatus(),
            "operate_door" => world.operate_door(float(request, "angle")?).map_err(err)?,
            "operate_drawer" => world
                .operate_drawer(float(request, "extension")?)
                .map_err(err)?,
            other => {
                return Err(ComponentError::new(format!(
                    "unsupported operation `{other}`"
                )))
            }
        }
        let mut out = Message::new();
        out.insert("door_angle".into(), Value::Float(world.door_angle()));
        out.insert(
            "drawer_extension".into(),
            Value::Float(world.drawer_extension()),
        );
        out.insert(
            "objects_at_nominal".into(),
            Value::Bool(world.objects_at_nominal()),
        );
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Embodiment;
    use crate::types::{ObjectModel, Pose6DoF};
    use serde_json::json;

    fn shared() -> SharedWorld {
        let m = ObjectModel::cuboid("box", 0.05, 0.05, 0.1).unwrap();
        let w = World::new(Embodiment::preset("arm_b").unwrap())
            .with_object(m, Pose6DoF::top_down(0.45, 0.0, 0.0, 0.0).unwrap())
            .unwrap();
        Arc::new(Mutex::new(w))
    }

    #[test]
    fn grasp_then_reset_through_the_wire_entry_point() {
        let world = shared();
        let robot = SimRobot::new(world.clone());
        let apparatus = SimApparatus::new(world.clone());
        let c = json!({"pose": {"x": 0.45, "y": 0.0, "z": 0.1, "roll": 0.0, "pitch": 0.0, "yaw": 0.0}, "quality_kind": "none"});
        let r = robot
            .handle_json("execute_grasp", &json!({"candidate": c}))
            .unwrap();
        assert_eq!(r, json!({"grasp_success": true, "failure_reason": ""}));
        let s = apparatus.handle_json("status", &json!({})).unwrap();
        assert_eq!(s["objects_at_nominal"], json!(false));
        let s = apparatus.handle_json("reset_objects", &json!({})).unwrap();
        assert_eq!(s["objects_at_nominal"], json!(true));
    }

    #[test]
    fn goal_keeps_the_embodiment_joint_set() {
        let world = shared();
        let robot = SimRobot::new(world.clone());
        let c = json!({"pose": {"x": 0.3, "y": 0.3, "z": 0.1, "roll": 0.0, "pitch": 0.0, "yaw": 0.5}, "quality_kind": "none"});
        let r = robot
            .handle_json("grasp_goal", &json!({"candidate": c}))
            .unwrap();
        let goal: JointState = serde_json::from_value(r["goal"].clone()).unwrap();
        assert_eq!(goal.len(), 7);
        assert_eq!(goal.get("joint_4"), Some(0.5));
        assert_eq!(goal.get("joint_7"), Some(0.0));
    }
}
