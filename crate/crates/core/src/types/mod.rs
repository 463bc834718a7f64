//! Geometry, sensor, and grasp message types shared across the pipeline.
//!
//! Units are fixed everywhere: meters, radians, pixels. Orientation uses the
//! intrinsic X-Y-Z roll-pitch-yaw convention, `R = Rx(roll) * Ry(pitch) * Rz(yaw)`.
//!
//! Grasp frame convention: a grasp pose's tool x-axis is the gripper closing
//! direction and its tool z-axis points back along the approach, so a
//! top-down grasp has `roll = pitch = 0` and `yaw` giving the closing axis.

mod grasp;
pub mod linalg;
mod motion;
mod object;
mod pose;
mod sensor;
mod value;

pub use grasp::{GraspCandidate, GraspRectangle, QualityKind, ScoredRectangle};
pub use motion::{JointState, Trajectory};
pub use object::ObjectModel;
pub use pose::{normalize_angles, wrap_angle, Pose6DoF, Quaternion};
pub use sensor::{rect_to_pose, CameraIntrinsics, DepthImage, PointCloud, INVALID_DEPTH};
pub use value::{Value, ValueKind};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("invalid pose: field `{0}` is not finite")]
    InvalidPose(&'static str),
    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),
    #[error("{0}")]
    Invariant(String),
    #[error("no valid depth at pixel ({u}, {v})")]
    NoDepth { u: usize, v: usize },
    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
}

pub(crate) fn invariant<T>(msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError::Invariant(msg.into()))
}
