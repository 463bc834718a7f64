//! Independent geometric oracles for the core message types.

use manipbench_core::types::{
    normalize_angles, rect_to_pose, CameraIntrinsics, DepthImage, GraspRectangle, Pose6DoF,
};
use proptest::prelude::*;

type M3 = [[f64; 3]; 3];

fn mul(a: &M3, b: &M3) -> M3 {
    let mut o = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                o[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    o
}

fn rx(a: f64) -> M3 {
    [
        [1.0, 0.0, 0.0],
        [0.0, a.cos(), -a.sin()],
        [0.0, a.sin(), a.cos()],
    ]
}
fn ry(a: f64) -> M3 {
    [
        [a.cos(), 0.0, a.sin()],
        [0.0, 1.0, 0.0],
        [-a.sin(), 0.0, a.cos()],
    ]
}
fn rz(a: f64) -> M3 {
    [
        [a.cos(), -a.sin(), 0.0],
        [a.sin(), a.cos(), 0.0],
        [0.0, 0.0, 1.0],
    ]
}

/// Shepperd's matrix-to-quaternion conversion, scalar first, `w >= 0`.
fn matrix_to_quaternion(m: &M3) -> [f64; 4] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let q = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        [
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        ]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        [
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        ]
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        [
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        ]
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        [
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        ]
    };
    if q[0] < 0.0 {
        [-q[0], -q[1], -q[2], -q[3]]
    } else {
        q
    }
}

fn oracle_quaternion(roll: f64, pitch: f64, yaw: f64) -> [f64; 4] {
    matrix_to_quaternion(&mul(&mul(&rx(roll), &ry(pitch)), &rz(yaw)))
}

/// Pinhole deprojection written out longhand.
fn oracle_deproject(u: f64, v: f64, d: f64, fx: f64, fy: f64, cx: f64, cy: f64) -> [f64; 3] {
    let x = (u - cx) / fx * d;
    let y = (v - cy) / fy * d;
    [x, y, d]
}

#[test]
fn quaternion_matches_matrix_oracle_on_the_reference_angles() {
    // frozen from the matrix oracle, cross-checked against an external
    // intrinsic-XYZ Euler conversion
    let frozen = [
        0.8186292656554958,
        -0.057539988180335414,
        -0.36242009435522565,
        0.4417996722272436,
    ];
    let oracle = oracle_quaternion(0.3, -0.7, 1.1);
    let q = Pose6DoF::new(0.0, 0.0, 0.0, 0.3, -0.7, 1.1)
        .unwrap()
        .to_quaternion()
        .as_array();
    for i in 0..4 {
        assert!(
            (oracle[i] - frozen[i]).abs() < 1e-12,
            "oracle drifted at {i}"
        );
        assert!(
            (q[i] - frozen[i]).abs() < 1e-12,
            "component {i}: {} vs {}",
            q[i],
            frozen[i]
        );
    }
}

#[test]
fn non_axis_rectangle_matches_hand_deprojection() {
    let frozen = [0.16, -0.08, 0.8];
    let o = oracle_deproject(420.0, 270.0, 0.8, 500.0, 500.0, 320.0, 320.0);
    assert!((0..3).all(|i| (o[i] - frozen[i]).abs() < 1e-15));

    let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 320.0).unwrap();
    let depth = DepthImage::filled(640, 640, 0.8, "camera").unwrap();
    let rect = GraspRectangle::new(420.0, 270.0, 30.0, 10.0, 0.4).unwrap();
    let p = rect_to_pose(&rect, &depth, &k, &Pose6DoF::identity()).unwrap();
    let d = f64::from(0.8f32);
    let expected = oracle_deproject(420.0, 270.0, d, 500.0, 500.0, 320.0, 320.0);
    for i in 0..3 {
        assert!((p.position()[i] - expected[i]).abs() < 1e-12);
        assert!((p.position()[i] - frozen[i]).abs() < 1e-7);
    }
}

#[test]
fn downward_camera_maps_image_angle_to_world_yaw() {
    // camera looking straight down: image y points along world -y
    let cam = Pose6DoF::new(0.0, 0.0, 1.0, std::f64::consts::PI, 0.0, 0.0).unwrap();
    let k = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0).unwrap();
    let depth = DepthImage::filled(100, 100, 1.0, "camera").unwrap();
    let rect = GraspRectangle::new(50.0, 50.0, 10.0, 4.0, 0.3).unwrap();
    let p = rect_to_pose(&rect, &depth, &k, &cam).unwrap();
    assert!(p.roll.abs() < 1e-12 && p.pitch.abs() < 1e-12);
    assert!((p.yaw + 0.3).abs() < 1e-12);
    assert!(p.position()[2].abs() < 1e-12);
}

fn angle() -> impl Strategy<Value = f64> {
    -10.0f64..10.0
}

proptest! {
    #[test]
    fn quaternion_is_unit_and_matches_oracle(r in angle(), p in -1.5f64..1.5, y in angle()) {
        let pose = Pose6DoF { x: 0.0, y: 0.0, z: 0.0, roll: r, pitch: p, yaw: y };
        let q = pose.to_quaternion();
        prop_assert!((q.norm() - 1.0).abs() < 1e-9);
        let o = oracle_quaternion(r, p, y);
        let qa = q.as_array();
        let same = (0..4).all(|i| (qa[i] - o[i]).abs() < 1e-9);
        let flipped = (0..4).all(|i| (qa[i] + o[i]).abs() < 1e-9);
        prop_assert!(same || flipped, "{:?} vs {:?}", qa, o);
    }

    #[test]
    fn normalization_preserves_the_rotation(r in angle(), p in angle(), y in angle()) {
        let raw = Pose6DoF { x: 0.0, y: 0.0, z: 0.0, roll: r, pitch: p, yaw: y };
        let a = raw.to_quaternion().as_array();
        let b = normalize_angles(&raw).unwrap().to_quaternion().as_array();
        let same = (0..4).all(|i| (a[i] - b[i]).abs() < 1e-9);
        let flipped = (0..4).all(|i| (a[i] + b[i]).abs() < 1e-9);
        prop_assert!(same || flipped);
    }

    #[test]
    fn quaternion_round_trips_away_from_gimbal_lock(r in -3.0f64..3.0, p in -1.4f64..1.4, y in -3.0f64..3.0) {
        let pose = Pose6DoF::new(0.1, 0.2, 0.3, r, p, y).unwrap();
        let back = Pose6DoF::from_quaternion(pose.position(), &pose.to_quaternion()).unwrap();
        prop_assert!((back.roll - pose.roll).abs() < 1e-9);
        prop_assert!((back.pitch - pose.pitch).abs() < 1e-9);
        prop_assert!((back.yaw - pose.yaw).abs() < 1e-9);
    }

    #[test]
    fn rect_to_pose_is_translation_equivariant(
        u in 0.0f64..63.0, v in 0.0f64..47.0, a in angle(),
        roll in angle(), pitch in angle(), yaw in angle(),
        tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in -2.0f64..2.0,
    ) {
        let k = CameraIntrinsics::new(60.0, 60.0, 32.0, 24.0).unwrap();
        let depth = DepthImage::filled(64, 48, 0.7, "camera").unwrap();
        let rect = GraspRectangle::new(u, v, 5.0, 3.0, a).unwrap();
        let cam = Pose6DoF::new(0.3, -0.2, 1.0, roll, pitch, yaw).unwrap();
        let base = rect_to_pose(&rect, &depth, &k, &cam).unwrap();
        let moved = rect_to_pose(&rect, &depth, &k, &cam.translated([tx, ty, tz])).unwrap();
        for (i, t) in [tx, ty, tz].iter().enumerate() {
            prop_assert!((moved.position()[i] - base.position()[i] - t).abs() < 1e-12);
        }
        prop_assert_eq!((moved.roll, moved.pitch, moved.yaw), (base.roll, base.pitch, base.yaw));
    }
}
