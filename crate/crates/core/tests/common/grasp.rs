//! Brute-force grasp oracle and the fixture objects it is checked on.

use manipbench_core::sim::{
    attempt_grasp, Embodiment, GraspAttempt, World, NO_CONTACT, OUT_OF_REACH, TOLERANCE,
};
use manipbench_core::types::{GraspCandidate, ObjectModel, Pose6DoF};

pub fn pose(x: f64, y: f64, z: f64, yaw: f64) -> Pose6DoF {
    Pose6DoF::top_down(x, y, z, yaw).unwrap()
}

pub fn inside_by_ray_cast(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

pub fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
    let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
    (d1 * d2 <= 0.0) && (d3 * d4 <= 0.0)
}

pub fn placed(footprint: &[[f64; 2]], at: &Pose6DoF) -> Vec<[f64; 2]> {
    let (c, s) = (at.yaw.cos(), at.yaw.sin());
    footprint
        .iter()
        .map(|v| [at.x + v[0] * c - v[1] * s, at.y + v[0] * s + v[1] * c])
        .collect()
}

pub struct Fixture {
    pub name: &'static str,
    pub footprint: Vec<[f64; 2]>,
    pub height: f64,
    pub at: Pose6DoF,
    /// Centroid in the object frame, worked out by hand.
    pub centroid: [f64; 2],
}

pub fn fixtures() -> Vec<Fixture> {
    let hex: Vec<[f64; 2]> = (0..6)
        .map(|i| {
            let a = std::f64::consts::PI / 3.0 * i as f64;
            [0.035 * a.cos(), 0.035 * a.sin()]
        })
        .collect();
    vec![
        Fixture {
            name: "box",
            footprint: vec![[-0.03, -0.02], [0.03, -0.02], [0.03, 0.02], [-0.03, 0.02]],
            height: 0.08,
            at: pose(0.4, 0.1, 0.0, 0.0),
            centroid: [0.0, 0.0],
        },
        Fixture {
            name: "can",
            footprint: hex,
            height: 0.12,
            at: pose(0.5, -0.2, 0.0, 0.3),
            centroid: [0.0, 0.0],
        },
        Fixture {
            name: "wedge",
            footprint: vec![[0.0, 0.0], [0.09, 0.0], [0.0, 0.06]],
            height: 0.05,
            at: pose(0.3, -0.1, 0.0, 1.1),
            centroid: [0.03, 0.02],
        },
        Fixture {
            name: "plank",
            footprint: vec![[-0.1, -0.01], [0.1, -0.01], [0.1, 0.01], [-0.1, 0.01]],
            height: 0.02,
            at: pose(0.55, 0.25, 0.04, -0.7),
            centroid: [0.0, 0.0],
        },
    ]
}

/// Expected outcome from first principles.
pub fn oracle(
    f: &Fixture,
    e: &Embodiment,
    tol: f64,
    elevation: f64,
    c: &Pose6DoF,
) -> Option<&'static str> {
    let m = e.mount_pose;
    let r = ((c.x - m.x).powi(2) + (c.y - m.y).powi(2) + (c.z - m.z).powi(2)).sqrt();
    if r > e.reach {
        return Some(OUT_OF_REACH);
    }
    let base = elevation + f.at.z;
    let in_band = c.z >= base - tol && c.z <= base + f.height + tol;
    // top-down candidate: closing direction is the yaw heading
    let half = e.gripper_max_width / 2.0;
    let (p1, p2) = (
        [c.x - half * c.yaw.cos(), c.y - half * c.yaw.sin()],
        [c.x + half * c.yaw.cos(), c.y + half * c.yaw.sin()],
    );
    let poly = placed(&f.footprint, &f.at);
    let n = poly.len();
    let touches = inside_by_ray_cast(&poly, p1)
        || inside_by_ray_cast(&poly, p2)
        || (0..n).any(|i| segments_cross(p1, p2, poly[i], poly[(i + 1) % n]));
    if !(in_band && touches) {
        return Some(NO_CONTACT);
    }
    let cen = placed(&[f.centroid], &f.at)[0];
    if ((c.x - cen[0]).powi(2) + (c.y - cen[1]).powi(2)).sqrt() > tol {
        return Some(TOLERANCE);
    }
    None
}

pub fn world_for(f: &Fixture, elevation: f64) -> World {
    let model = ObjectModel::new(f.name, f.footprint.clone(), f.height).unwrap();
    let mut w = World::new(Embodiment::preset("arm_a").unwrap())
        .with_object(model, f.at)
        .unwrap();
    w.workspace_elevation = elevation;
    w
}

/// Outcome of checking `attempt_grasp` against the oracle on one fixture.
pub struct Agreement {
    pub disagreements: usize,
    /// Expected outcomes seen: success, out of reach, no contact, tolerance.
    pub seen: [usize; 4],
}

/// Draws `n` random candidates around the fixture and compares each
/// simulated attempt with the oracle.
pub fn check_fixture(f: &Fixture, elevation: f64, n: usize, rng: &mut impl rand::Rng) -> Agreement {
    let nominal = world_for(f, elevation);
    let mut out = Agreement {
        disagreements: 0,
        seen: [0; 4],
    };
    for _ in 0..n {
        // mix near-centroid, near-object and far candidates
        let spread = [0.03, 0.12, 0.6][rng.random_range(0..3)];
        let c = pose(
            f.at.x + rng.random_range(-spread..spread),
            f.at.y + rng.random_range(-spread..spread),
            elevation + f.at.z + rng.random_range(-0.05..f.height + 0.05),
            rng.random_range(-3.1..3.1),
        );
        let expected = oracle(
            f,
            &nominal.embodiment,
            nominal.grasp_tolerance,
            elevation,
            &c,
        );
        let mut w = nominal.clone();
        let attempt = GraspAttempt {
            candidate: GraspCandidate::unscored(c).unwrap(),
            embodiment: nominal.embodiment.name.clone(),
            target: f.name.into(),
        };
        let got = attempt_grasp(&mut w, &attempt).unwrap();
        if got.success != got.failure_reason.is_none() || got.failure_reason != expected {
            out.disagreements += 1;
        }
        let slot = match expected {
            None => 0,
            Some(OUT_OF_REACH) => 1,
            Some(NO_CONTACT) => 2,
            _ => 3,
        };
        out.seen[slot] += 1;
    }
    out
}
