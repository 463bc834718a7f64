use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::linalg::{self, Vec3};
use super::{invariant, GraspRectangle, Pose6DoF, TypeError};

/// Reserved depth value marking a pixel without a measurement.
pub const INVALID_DEPTH: f32 = 0.0;

/// Pinhole intrinsics. Camera frame: x right, y down, z along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = TypeError;
    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, TypeError> {
        if ![fx, fy, cx, cy].iter().all(|v| v.is_finite()) {
            return Err(TypeError::NonFinite("intrinsics"));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return invariant(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            ));
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy })
    }

    /// Camera-frame point for pixel `(u, v)` at depth `depth` along the optical axis.
    pub fn deproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        [
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        ]
    }

    /// Viewing-ray direction for pixel `(u, v)`, scaled to unit optical-axis component.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        self.deproject(u, v, 1.0)
    }
}

/// Row-major depth image in meters. [`INVALID_DEPTH`] marks holes.
///
/// Wire form: `data` is base64 of little-endian `f32` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDepth", into = "RawDepth")]
pub struct DepthImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
    frame: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDepth {
    width: usize,
    height: usize,
    frame: String,
    data: String,
}

impl TryFrom<RawDepth> for DepthImage {
    type Error = TypeError;
    fn try_from(r: RawDepth) -> Result<Self, Self::Error> {
        let bytes = B64
            .decode(r.data.as_bytes())
            .map_err(|e| TypeError::Invariant(format!("depth data is not base64: {e}")))?;
        if bytes.len() % 4 != 0 {
            return invariant(format!(
                "depth data has {} bytes, not a multiple of 4",
                bytes.len()
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        DepthImage::new(r.width, r.height, data, r.frame)
    }
}

impl From<DepthImage> for RawDepth {
    fn from(d: DepthImage) -> Self {
        let mut bytes = Vec::with_capacity(d.data.len() * 4);
        for v in &d.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        RawDepth {
            width: d.width,
            height: d.height,
            frame: d.frame,
            data: B64.encode(bytes),
        }
    }
}

impl DepthImage {
    pub fn new(
        width: usize,
        height: usize,
        data: Vec<f32>,
        frame: impl Into<String>,
    ) -> Result<Self, TypeError> {
        if data.len() != width * height {
            return invariant(format!(
                "depth data length {} does not match {width}x{height}",
                data.len()
            ));
        }
        if let Some(bad) = data.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return invariant(format!(
                "depth value {bad} is neither >= 0 nor the invalid marker"
            ));
        }
        Ok(DepthImage {
            width,
            height,
            data,
            frame: frame.into(),
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        depth: f32,
        frame: impl Into<String>,
    ) -> Result<Self, TypeError> {
        Self::new(width, height, vec![depth; width * height], frame)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame(&self) -> &str {
        &self.frame
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn raw(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }

    /// Depth at a pixel, `None` when the pixel is a hole.
    pub fn at(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.raw(u, v);
        (d > INVALID_DEPTH).then_some(f64::from(d))
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > INVALID_DEPTH).count()
    }

    /// Nearest pixel index for a continuous pixel coordinate; pixel centers sit
    /// on integer coordinates.
    pub fn pixel_index(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let inside = |c: f64, n: usize| c >= -0.5 && c < n as f64 - 0.5;
        if !(inside(x, self.width) && inside(y, self.height)) {
            return None;
        }
        let u = (x.round().max(0.0) as usize).min(self.width - 1);
        let v = (y.round().max(0.0) as usize).min(self.height - 1);
        Some((u, v))
    }
}

/// Point set in meters; wire form is a flat `[x0, y0, z0, x1, ...]` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCloud", into = "RawCloud")]
pub struct PointCloud {
    points: Vec<Vec3>,
    frame: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCloud {
    frame: String,
    points: Vec<f64>,
}

impl TryFrom<RawCloud> for PointCloud {
    type Error = TypeError;
    fn try_from(r: RawCloud) -> Result<Self, Self::Error> {
        if !r.points.len().is_multiple_of(3) {
            return invariant(format!(
                "flat point array length {} is not a multiple of 3",
                r.points.len()
            ));
        }
        let points = r
            .points
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        PointCloud::new(points, r.frame)
    }
}

impl From<PointCloud> for RawCloud {
    fn from(c: PointCloud) -> Self {
        RawCloud {
            frame: c.frame,
            points: c.points.into_iter().flatten().collect(),
        }
    }
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: impl Into<String>) -> Result<Self, TypeError> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(TypeError::NonFinite("point cloud"));
        }
        Ok(PointCloud {
            points,
            frame: frame.into(),
        })
    }

    pub fn empty(frame: impl Into<String>) -> Self {
        PointCloud {
            points: Vec::new(),
            frame: frame.into(),
        }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn frame(&self) -> &str {
        &self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Deprojects a grasp rectangle into a 6-DoF grasp pose in the camera's parent frame.
///
/// The position is the pinhole deprojection of the rectangle center at the
/// depth of its nearest pixel. The tool z-axis is anti-parallel to the optical
/// axis and the tool x-axis (closing direction) lies along `rect.angle` in the
/// image plane, measured from image x towards image y.
pub fn rect_to_pose(
    rect: &GraspRectangle,
    depth: &DepthImage,
    k: &CameraIntrinsics,
    camera_pose: &Pose6DoF,
) -> Result<Pose6DoF, TypeError> {
    let (u, v) = depth
        .pixel_index(rect.x, rect.y)
        .ok_or(TypeError::OutOfBounds {
            x: rect.x,
            y: rect.y,
            width: depth.width(),
            height: depth.height(),
        })?;
    let d = depth.at(u, v).ok_or(TypeError::NoDepth { u, v })?;
    let p_cam = k.deproject(rect.x, rect.y, d);

    let (s, c) = rect.angle.sin_cos();
    // columns: tool x, tool y, tool z in camera coordinates
    let grasp_in_cam = [[c, s, 0.0], [s, -c, 0.0], [0.0, 0.0, -1.0]];
    let r = linalg::mat_mul(&camera_pose.rotation_matrix(), &grasp_in_cam);
    Pose6DoF::from_rotation(camera_pose.transform_point(&p_cam), &r)
}
