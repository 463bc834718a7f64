use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::linalg::{self, Mat3, Vec3};
use super::TypeError;

/// Wraps an angle into the half-open interval `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    let wrapped = if a > PI { a - 2.0 * PI } else { a };
    // folds -0.0 into 0.0
    wrapped + 0.0
}

/// A 6-DoF pose: position in meters, intrinsic X-Y-Z roll/pitch/yaw in radians.
///
/// Values built through [`Pose6DoF::new`] or deserialized from the wire always
/// have finite fields and angles in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct Pose6DoF {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    x: f64,
    y: f64,
    z: f64,
    roll: f64,
    pitch: f64,
    yaw: f64,
}

impl TryFrom<RawPose> for Pose6DoF {
    type Error = TypeError;

    fn try_from(raw: RawPose) -> Result<Self, Self::Error> {
        Pose6DoF::new(raw.x, raw.y, raw.z, raw.roll, raw.pitch, raw.yaw)
    }
}

/// Returns `pose` with its angles wrapped into `(-π, π]`.
pub fn normalize_angles(pose: &Pose6DoF) -> Result<Pose6DoF, TypeError> {
    pose.check_finite()?;
    Ok(Pose6DoF {
        roll: wrap_angle(pose.roll),
        pitch: wrap_angle(pose.pitch),
        yaw: wrap_angle(pose.yaw),
        ..*pose
    })
}

impl Pose6DoF {
    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Result<Self, TypeError> {
        normalize_angles(&Pose6DoF {
            x,
            y,
            z,
            roll,
            pitch,
            yaw,
        })
    }

    pub const fn identity() -> Self {
        Pose6DoF {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
        }
    }

    /// Top-down pose at a position with the closing axis at `yaw`.
    pub fn top_down(x: f64, y: f64, z: f64, yaw: f64) -> Result<Self, TypeError> {
        Self::new(x, y, z, 0.0, 0.0, yaw)
    }

    pub fn check_finite(&self) -> Result<(), TypeError> {
        let fields = [
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("roll", self.roll),
            ("pitch", self.pitch),
            ("yaw", self.yaw),
        ];
        match fields.iter().find(|(_, v)| !v.is_finite()) {
            Some((name, _)) => Err(TypeError::InvalidPose(name)),
            None => Ok(()),
        }
    }

    pub fn position(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        let rxy = linalg::mat_mul(&linalg::rot_x(self.roll), &linalg::rot_y(self.pitch));
        linalg::mat_mul(&rxy, &linalg::rot_z(self.yaw))
    }

    /// Builds a pose from a position and a rotation matrix.
    ///
    /// At gimbal lock (`|pitch| = π/2`) yaw is set to zero and the remaining
    /// rotation is folded into roll.
    pub fn from_rotation(position: Vec3, r: &Mat3) -> Result<Self, TypeError> {
        let sp = r[0][2].clamp(-1.0, 1.0);
        let pitch = sp.asin();
        let (roll, yaw) = if sp.abs() > 1.0 - 1e-12 {
            ((sp.signum() * r[1][0]).atan2(r[1][1]), 0.0)
        } else {
            ((-r[1][2]).atan2(r[2][2]), (-r[0][1]).atan2(r[0][0]))
        };
        Self::new(position[0], position[1], position[2], roll, pitch, yaw)
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        linalg::add(
            &linalg::mat_vec(&self.rotation_matrix(), p),
            &self.position(),
        )
    }

    /// `self ∘ other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose6DoF) -> Result<Pose6DoF, TypeError> {
        let r = linalg::mat_mul(&self.rotation_matrix(), &other.rotation_matrix());
        Self::from_rotation(self.transform_point(&other.position()), &r)
    }

    pub fn translated(&self, t: Vec3) -> Pose6DoF {
        Pose6DoF {
            x: self.x + t[0],
            y: self.y + t[1],
            z: self.z + t[2],
            ..*self
        }
    }

    /// Heading of the tool x-axis projected into the world XY plane.
    pub fn closing_heading(&self) -> f64 {
        let r = self.rotation_matrix();
        r[1][0].atan2(r[0][0])
    }

    pub fn distance_to(&self, p: &Vec3) -> f64 {
        linalg::norm(&linalg::sub(&self.position(), p))
    }

    /// Unit quaternion for the orientation, scalar-first, canonicalized to `w >= 0`.
    pub fn to_quaternion(&self) -> Quaternion {
        let half = |a: f64| (0.5 * a).sin_cos();
        let (sr, cr) = half(self.roll);
        let (sp, cp) = half(self.pitch);
        let (sy, cy) = half(self.yaw);
        let qx = Quaternion {
            w: cr,
            x: sr,
            y: 0.0,
            z: 0.0,
        };
        let qy = Quaternion {
            w: cp,
            x: 0.0,
            y: sp,
            z: 0.0,
        };
        let qz = Quaternion {
            w: cy,
            x: 0.0,
            y: 0.0,
            z: sy,
        };
        qx.mul(&qy).mul(&qz).normalized().canonical()
    }

    pub fn from_quaternion(position: Vec3, q: &Quaternion) -> Result<Self, TypeError> {
        Self::from_rotation(position, &q.normalized().rotation_matrix())
    }
}

/// Scalar-first unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub fn mul(&self, o: &Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quaternion {
        let n = self.norm();
        Quaternion {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    fn canonical(self) -> Quaternion {
        if self.w < 0.0 {
            Quaternion {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        let Quaternion { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}
