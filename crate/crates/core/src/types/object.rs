use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{invariant, Pose6DoF, TypeError};

/// An object approximated as a convex footprint extruded to `height`.
///
/// The footprint is stored counter-clockwise in the object frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawObject")]
pub struct ObjectModel {
    pub name: String,
    footprint: Vec<[f64; 2]>,
    pub height: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    name: String,
    footprint: Vec<[f64; 2]>,
    height: f64,
}

impl TryFrom<RawObject> for ObjectModel {
    type Error = TypeError;
    fn try_from(r: RawObject) -> Result<Self, Self::Error> {
        ObjectModel::new(r.name, r.footprint, r.height)
    }
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl ObjectModel {
    pub fn new(
        name: impl Into<String>,
        footprint: Vec<[f64; 2]>,
        height: f64,
    ) -> Result<Self, TypeError> {
        let name = name.into();
        if footprint.len() < 3 {
            return invariant(format!("footprint of `{name}` needs at least 3 vertices"));
        }
        if footprint.iter().flatten().any(|v| !v.is_finite()) || !height.is_finite() {
            return Err(TypeError::NonFinite("object model"));
        }
        if height <= 0.0 {
            return invariant(format!("object `{name}` height must be positive"));
        }
        let mut footprint = footprint;
        let area = signed_area(&footprint);
        if area.abs() <= 1e-12 {
            return invariant(format!("footprint of `{name}` has zero area"));
        }
        if area < 0.0 {
            footprint.reverse();
        }
        // convex and simple: no right turns, total turning exactly one revolution
        let n = footprint.len();
        let mut turning = 0.0;
        for i in 0..n {
            let (a, b, c) = (footprint[i], footprint[(i + 1) % n], footprint[(i + 2) % n]);
            if cross(a, b, c) < -1e-12 {
                return invariant(format!("footprint of `{name}` is not convex"));
            }
            let h1 = (b[1] - a[1]).atan2(b[0] - a[0]);
            let h2 = (c[1] - b[1]).atan2(c[0] - b[0]);
            turning += super::wrap_angle(h2 - h1);
        }
        if (turning - 2.0 * PI).abs() > 1e-6 {
            return invariant(format!("footprint of `{name}` self-intersects"));
        }
        Ok(ObjectModel {
            name,
            footprint,
            height,
        })
    }

    /// Axis-aligned rectangular box centered on the object origin.
    pub fn cuboid(
        name: impl Into<String>,
        size_x: f64,
        size_y: f64,
        height: f64,
    ) -> Result<Self, TypeError> {
        let (hx, hy) = (size_x / 2.0, size_y / 2.0);
        Self::new(
            name,
            vec![[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]],
            height,
        )
    }

    /// Regular polygon approximating a cylinder.
    pub fn prism(
        name: impl Into<String>,
        radius: f64,
        sides: usize,
        height: f64,
    ) -> Result<Self, TypeError> {
        let footprint = (0..sides)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / sides as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Self::new(name, footprint, height)
    }

    pub fn footprint(&self) -> &[[f64; 2]] {
        &self.footprint
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.footprint)
    }

    /// Area centroid of the footprint in the object frame.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.footprint.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let (a, b) = (self.footprint[i], self.footprint[(i + 1) % n]);
            let w = a[0] * b[1] - b[0] * a[1];
            cx += (a[0] + b[0]) * w;
            cy += (a[1] + b[1]) * w;
        }
        let k = 6.0 * self.area();
        [cx / k, cy / k]
    }

    /// Footprint placed by `pose` (planar: x, y and yaw only).
    pub fn world_footprint(&self, pose: &Pose6DoF) -> Vec<[f64; 2]> {
        let (s, c) = pose.yaw.sin_cos();
        self.footprint
            .iter()
            .map(|p| [pose.x + c * p[0] - s * p[1], pose.y + s * p[0] + c * p[1]])
            .collect()
    }

    pub fn world_centroid(&self, pose: &Pose6DoF) -> [f64; 2] {
        let p = self.centroid();
        let (s, c) = pose.yaw.sin_cos();
        [pose.x + c * p[0] - s * p[1], pose.y + s * p[0] + c * p[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clockwise_footprints_are_stored_counter_clockwise() {
        let o = ObjectModel::new(
            "b",
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
            0.1,
        )
        .unwrap();
        assert!(o.area() > 0.0);
        assert_eq!(o.centroid(), [0.5, 0.5]);
    }

    #[test]
    fn degenerate_and_concave_footprints_are_rejected() {
        assert!(ObjectModel::new("l", vec![[0.0, 0.0], [1.0, 0.0]], 0.1).is_err());
        assert!(ObjectModel::new("z", vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 0.1).is_err());
        let dart = vec![[0.0, 0.0], [2.0, 1.0], [0.0, 2.0], [0.5, 1.0]];
        assert!(ObjectModel::new("dart", dart, 0.1).is_err());
        let star: Vec<[f64; 2]> = (0..5)
            .map(|i| {
                let a = 4.0 * PI * i as f64 / 5.0;
                [a.cos(), a.sin()]
            })
            .collect();
        assert!(ObjectModel::new("star", star, 0.1).is_err());
        assert!(ObjectModel::cuboid("flat", 0.1, 0.1, 0.0).is_err());
    }

    #[test]
    fn prism_centroid_is_origin() {
        let o = ObjectModel::prism("can", 0.03, 8, 0.1).unwrap();
        let c = o.centroid();
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }
}
