use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Embodiment, World};
use crate::types::linalg::{mat_vec, Vec3};
use crate::types::{DepthImage, PointCloud, INVALID_DEPTH};

pub(crate) fn point_in_convex(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    // footprints are counter-clockwise; boundary points count as inside
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}

/// Depth along `dir` (unit optical-axis component) from `origin` to the
/// plane `z = h`, if the plane lies in front of the camera.
fn plane_hit(origin: &Vec3, dir: &Vec3, h: f64) -> Option<f64> {
    if dir[2] == 0.0 {
        return None;
    }
    let t = (h - origin[2]) / dir[2];
    (t > 0.0).then_some(t)
}

/// Noise-free depth of pixel `(u, v)` and whether it hit the table.
fn trace(world: &World, origin: &Vec3, dir: &Vec3) -> Option<(f64, bool)> {
    let mut best: Option<(f64, bool)> =
        plane_hit(origin, dir, world.workspace_elevation).map(|t| (t, true));
    for (_, o) in world.visible_objects() {
        let top = world.base_height(o) + o.model.height;
        let Some(t) = plane_hit(origin, dir, top) else {
            continue;
        };
        if best.is_some_and(|(b, _)| b <= t) {
            continue;
        }
        let p = [origin[0] + t * dir[0], origin[1] + t * dir[1]];
        if point_in_convex(&o.model.world_footprint(&o.pose), p) {
            best = Some((t, false));
        }
    }
    best
}

/// Pinhole rendering of object top faces and the table plane.
///
/// Depth is the camera-frame z of the hit. One standard-normal sample is
/// drawn per pixel in row-major order from a generator seeded with the
/// world's seed, scaled by `base_noise * lighting` on objects and
/// additionally by the texture scale on the table.
pub fn render_depth(world: &World, embodiment: &Embodiment) -> DepthImage {
    let (w, h) = (embodiment.image_width, embodiment.image_height);
    let k = &embodiment.intrinsics;
    let cam = &embodiment.camera_pose;
    let r = cam.rotation_matrix();
    let origin = cam.position();
    let sd_object = world.base_noise * world.lighting_noise_scale;
    let sd_table = sd_object * world.texture_noise_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(world.rng_seed);
    let mut data = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let n: f64 = StandardNormal.sample(&mut rng);
            let dir = mat_vec(&r, &k.ray(u as f64, v as f64));
            let d = match trace(world, &origin, &dir) {
                Some((t, table)) => t + n * if table { sd_table } else { sd_object },
                None => 0.0,
            };
            data.push(if d > 0.0 && d.is_finite() {
                d as f32
            } else {
                INVALID_DEPTH
            });
        }
    }
    DepthImage::new(w, h, data, "camera").expect("image dimensions match the embodiment")
}

/// World-frame points of every valid pixel of [`render_depth`].
pub fn render_cloud(world: &World, embodiment: &Embodiment) -> PointCloud {
    cloud_from_depth(&render_depth(world, embodiment), embodiment)
}

pub(crate) fn cloud_from_depth(depth: &DepthImage, embodiment: &Embodiment) -> PointCloud {
    let k = &embodiment.intrinsics;
    let cam = &embodiment.camera_pose;
    let mut points = Vec::with_capacity(depth.valid_count());
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if let Some(d) = depth.at(u, v) {
                points.push(cam.transform_point(&k.deproject(u as f64, v as f64, d)));
            }
        }
    }
    PointCloud::new(points, "world").expect("deprojected points are finite")
}
