use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{invariant, TypeError};

/// Named joint positions (radians for revolute joints, meters for prismatic).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointState(BTreeMap<String, f64>);

impl JointState {
    pub fn new(
        joints: impl IntoIterator<Item = (impl Into<String>, f64)>,
    ) -> Result<Self, TypeError> {
        let map: BTreeMap<String, f64> = joints.into_iter().map(|(k, v)| (k.into(), v)).collect();
        if map.values().any(|v| !v.is_finite()) {
            return Err(TypeError::NonFinite("joint state"));
        }
        Ok(JointState(map))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn same_joints(&self, other: &JointState) -> bool {
        self.0.keys().eq(other.0.keys())
    }
}

/// A joint-space path: at least two waypoints sharing one joint-name set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct Trajectory {
    waypoints: Vec<JointState>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    waypoints: Vec<JointState>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = TypeError;
    fn try_from(r: RawTrajectory) -> Result<Self, Self::Error> {
        Trajectory::new(r.waypoints)
    }
}

impl Trajectory {
    pub fn new(waypoints: Vec<JointState>) -> Result<Self, TypeError> {
        if waypoints.len() < 2 {
            return invariant(format!(
                "trajectory needs at least 2 waypoints, got {}",
                waypoints.len()
            ));
        }
        if let Some(i) = waypoints.iter().position(|w| !w.same_joints(&waypoints[0])) {
            return invariant(format!(
                "waypoint {i} has a different joint set than waypoint 0"
            ));
        }
        Ok(Trajectory { waypoints })
    }

    pub fn waypoints(&self) -> &[JointState] {
        &self.waypoints
    }

    pub fn first(&self) -> &JointState {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &JointState {
        &self.waypoints[self.waypoints.len() - 1]
    }
}
