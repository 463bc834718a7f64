use serde::{Deserialize, Serialize};

use super::{SimError, World, LIFT_HEIGHT};
use crate::types::GraspCandidate;

pub const OUT_OF_REACH: &str = "out-of-reach";
pub const NO_CONTACT: &str = "no-contact";
pub const TOLERANCE: &str = "tolerance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspAttempt {
    pub candidate: GraspCandidate,
    pub embodiment: String,
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraspResult {
    pub success: bool,
    pub failure_reason: Option<&'static str>,
}

impl GraspResult {
    fn fail(reason: &'static str) -> Self {
        GraspResult {
            success: false,
            failure_reason: Some(reason),
        }
    }
}

/// Parametric clip of the segment `p + t d`, `t` in [0, 1], against a
/// counter-clockwise convex polygon; true if any part survives.
pub(crate) fn segment_hits_convex(poly: &[[f64; 2]], p: [f64; 2], d: [f64; 2]) -> bool {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let num = e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0]);
        let den = e[0] * d[1] - e[1] * d[0];
        if den == 0.0 {
            if num < 0.0 {
                return false;
            }
            continue;
        }
        let t = -num / den;
        if den > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
        if lo > hi {
            return false;
        }
    }
    true
}

/// Evaluates one grasp and, on success, lifts the object off the table.
///
/// Checks run in order: reach from the mount, contact of the closing
/// segment with the footprint within the object's height band (padded by
/// the grasp tolerance), then planar distance to the footprint centroid.
pub fn attempt_grasp(world: &mut World, attempt: &GraspAttempt) -> Result<GraspResult, SimError> {
    if attempt.embodiment != world.embodiment.name {
        return Err(SimError::UnknownEmbodiment(attempt.embodiment.clone()));
    }
    if !world.is_active(&attempt.target) {
        return Err(SimError::UnknownObject(attempt.target.clone()));
    }
    let tol = world.grasp_tolerance;
    let elevation = world.workspace_elevation;
    let e = &world.embodiment;
    let (reach, width, mount) = (e.reach, e.gripper_max_width, e.mount_pose.position());
    let o = world
        .object_mut(&attempt.target)
        .expect("active objects exist");
    if o.held {
        return Err(SimError::AlreadyHeld(attempt.target.clone()));
    }
    let pose = attempt.candidate.pose();
    pose.check_finite()
        .map_err(|e| SimError::Invalid(e.to_string()))?;

    if pose.distance_to(&mount) > reach {
        return Ok(GraspResult::fail(OUT_OF_REACH));
    }
    let base = elevation + o.pose.z;
    let in_band = pose.z >= base - tol && pose.z <= base + o.model.height + tol;
    let (s, c) = pose.closing_heading().sin_cos();
    let half = width / 2.0;
    let start = [pose.x - half * c, pose.y - half * s];
    let contact = segment_hits_convex(
        &o.model.world_footprint(&o.pose),
        start,
        [width * c, width * s],
    );
    if !(in_band && contact) {
        return Ok(GraspResult::fail(NO_CONTACT));
    }
    let centroid = o.model.world_centroid(&o.pose);
    if (pose.x - centroid[0]).hypot(pose.y - centroid[1]) > tol {
        return Ok(GraspResult::fail(TOLERANCE));
    }
    o.held = true;
    o.pose.z += LIFT_HEIGHT;
    Ok(GraspResult {
        success: true,
        failure_reason: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Embodiment;
    use crate::types::{ObjectModel, Pose6DoF};

    fn world_with(x: f64, y: f64) -> World {
        let m = ObjectModel::cuboid("box", 0.06, 0.04, 0.1).unwrap();
        World::new(Embodiment::preset("arm_a").unwrap())
            .with_object(m, Pose6DoF::top_down(x, y, 0.0, 0.0).unwrap())
            .unwrap()
    }

    fn attempt(x: f64, y: f64, z: f64) -> GraspAttempt {
        GraspAttempt {
            candidate: GraspCandidate::unscored(Pose6DoF::top_down(x, y, z, 0.0).unwrap()).unwrap(),
            embodiment: "arm_a".into(),
            target: "box".into(),
        }
    }

    #[test]
    fn centroid_grasp_succeeds_and_holds() {
        let mut w = world_with(0.4, 0.1);
        let r = attempt_grasp(&mut w, &attempt(0.4, 0.1, 0.1)).unwrap();
        assert_eq!(
            r,
            GraspResult {
                success: true,
                failure_reason: None
            }
        );
        assert!(w.object("box").unwrap().held);
        assert_eq!(
            attempt_grasp(&mut w, &attempt(0.4, 0.1, 0.1)),
            Err(SimError::AlreadyHeld("box".into()))
        );
    }

    #[test]
    fn failure_reasons() {
        let mut w = world_with(0.0, 0.4);
        assert_eq!(
            attempt_grasp(&mut w, &attempt(0.0, -0.6, 0.05))
                .unwrap()
                .failure_reason,
            Some(NO_CONTACT)
        );
        assert_eq!(
            attempt_grasp(&mut w, &attempt(0.0, 0.9, 0.05))
                .unwrap()
                .failure_reason,
            Some(OUT_OF_REACH)
        );
        // touching the footprint edge but far from the centroid
        assert_eq!(
            attempt_grasp(&mut w, &attempt(0.05, 0.4, 0.05))
                .unwrap()
                .failure_reason,
            Some(TOLERANCE)
        );
        assert_eq!(
            attempt_grasp(&mut w, &attempt(0.0, 0.4, 0.5))
                .unwrap()
                .failure_reason,
            Some(NO_CONTACT)
        );
        let mut bad = attempt(0.0, 0.4, 0.05);
        bad.target = "mug".into();
        assert!(matches!(
            attempt_grasp(&mut w, &bad),
            Err(SimError::UnknownObject(_))
        ));
    }

    #[test]
    fn tolerance_boundary_is_inclusive() {
        let mut w = world_with(0.0, 0.0);
        let r = attempt_grasp(&mut w, &attempt(DEFAULT_TOL, 0.0, 0.05)).unwrap();
        assert!(r.success);
    }

    const DEFAULT_TOL: f64 = crate::sim::DEFAULT_GRASP_TOLERANCE;
}
