use super::plane::support_plane_height;
use crate::types::linalg::Vec3;
use crate::types::PointCloud;

pub const DEFAULT_PLANE_TOLERANCE: f64 = 0.01;

/// Keeps the points inside the box `[lo, hi]` (inclusive) that rise more
/// than `tolerance` above the support plane of the cropped points.
pub fn crop_and_remove_plane(cloud: &PointCloud, lo: Vec3, hi: Vec3, tolerance: f64) -> PointCloud {
    let inside: Vec<Vec3> = cloud
        .points()
        .iter()
        .filter(|p| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
        .copied()
        .collect();
    let Some(plane) = support_plane_height(inside.iter().map(|p| p[2]), tolerance) else {
        return PointCloud::empty(cloud.frame());
    };
    let kept = inside
        .into_iter()
        .filter(|p| p[2] - plane > tolerance)
        .collect();
    PointCloud::new(kept, cloud.frame()).expect("subset of a valid cloud")
}
