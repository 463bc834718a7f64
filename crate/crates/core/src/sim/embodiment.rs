use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::types::{CameraIntrinsics, JointState, Pose6DoF};

/// A robot, gripper and camera, described purely by parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embodiment {
    pub name: String,
    /// Maximum distance from the mount origin to a reachable grasp position.
    pub reach: f64,
    pub home: JointState,
    pub gripper_max_width: f64,
    pub mount_pose: Pose6DoF,
    pub intrinsics: CameraIntrinsics,
    pub camera_pose: Pose6DoF,
    pub image_width: usize,
    pub image_height: usize,
}

pub const PRESETS: [&str; 2] = ["arm_a", "arm_b"];

fn overhead_camera() -> (CameraIntrinsics, Pose6DoF) {
    let k = CameraIntrinsics {
        fx: 200.0,
        fy: 200.0,
        cx: 79.5,
        cy: 59.5,
    };
    // looking straight down from 0.9 m above the workspace origin plane
    let pose = Pose6DoF {
        x: 0.45,
        y: 0.0,
        z: 0.9,
        roll: PI,
        pitch: 0.0,
        yaw: 0.0,
    };
    (k, pose)
}

fn joints(values: &[f64]) -> JointState {
    let named: Vec<(String, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("joint_{}", i + 1), *v))
        .collect();
    JointState::new(named).unwrap_or_default()
}

impl Embodiment {
    /// Shipped presets: `arm_a` (6 joints, 0.85 m reach) and `arm_b`
    /// (7 joints, 0.90 m reach). Both share the overhead camera.
    pub fn preset(name: &str) -> Result<Embodiment, SimError> {
        let (intrinsics, camera_pose) = overhead_camera();
        let (reach, home) = match name {
            "arm_a" => (0.85, joints(&[0.0, -1.57, 1.57, -1.57, -1.57, 0.0])),
            "arm_b" => (0.90, joints(&[0.0, 2.9, 0.0, 1.3, 4.2, 1.4, 0.0])),
            other => return Err(SimError::UnknownEmbodiment(other.to_owned())),
        };
        Ok(Embodiment {
            name: name.to_owned(),
            reach,
            home,
            gripper_max_width: 0.085,
            mount_pose: Pose6DoF::identity(),
            intrinsics,
            camera_pose,
            image_width: 160,
            image_height: 120,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if [self.reach, self.gripper_max_width]
            .iter()
            .any(|v| v.is_nan() || *v <= 0.0)
        {
            return Err(SimError::Invalid(format!(
                "embodiment `{}` needs positive reach and gripper width",
                self.name
            )));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(SimError::Invalid(format!(
                "embodiment `{}` has an empty image",
                self.name
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_differ_only_in_parameters() {
        let a = Embodiment::preset("arm_a").unwrap();
        let b = Embodiment::preset("arm_b").unwrap();
        assert_eq!((a.reach, b.reach), (0.85, 0.90));
        assert_eq!((a.home.len(), b.home.len()), (6, 7));
        assert_eq!(a.camera_pose, b.camera_pose);
        assert!(a.validate().is_ok());
        assert!(Embodiment::preset("arm_c").is_err());
    }
}
