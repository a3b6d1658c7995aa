use std::f64::consts::PI;

use basecamp_core::annotate::{quickhull, AvoidanceRegion};
use basecamp_core::collide::robot_in_collision;
use basecamp_core::geom::{Transform, Vec3};
use basecamp_core::kinematics::{
    forward_kinematics, generic6r, jacobian, planar_2link, reach_check, solve_ik, FailureReason, IkConfig, JointVector,
    ReachConfig, RobotModel, TaskTarget,
};
use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_q(model: &RobotModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    model.joints.iter().map(|j| rng.random_range(j.limits[0]..=j.limits[1])).collect()
}

fn tool_target(model: &RobotModel, q: &[f64]) -> TaskTarget {
    let tool = forward_kinematics(model, q).unwrap().tool;
    TaskTarget::new(tool.translation.vector, tool.rotation * Vec3::z(), "t").unwrap()
}

#[test]
fn jacobian_matches_central_differences() {
    let model = generic6r();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = random_q(&model, &mut rng);
        let j = jacobian(&model, &q).unwrap();
        for i in 0..model.dof() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let fp = forward_kinematics(&model, &qp).unwrap().tool;
            let fm = forward_kinematics(&model, &qm).unwrap().tool;
            let lin = (fp.translation.vector - fm.translation.vector) / (2.0 * h);
            let ang = (fp.rotation * fm.rotation.inverse()).scaled_axis() / (2.0 * h);
            for r in 0..3 {
                worst = worst.max((j[(r, i)] - lin[r]).abs());
                worst = worst.max((j[(r + 3, i)] - ang[r]).abs());
            }
        }
    }
    assert!(worst < 1e-5, "max deviation {worst}");
}

#[test]
fn ik_recovers_fk_targets_from_nearby_seeds() {
    let model = generic6r();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = IkConfig::default();
    let mut ok = 0;
    for _ in 0..500 {
        let q = random_q(&model, &mut rng);
        let target = tool_target(&model, &q);
        let mut seed: Vec<f64> = q.iter().map(|v| v + rng.random_range(-0.1..=0.1)).collect();
        model.clamp(&mut seed);
        let r = solve_ik(&model, &Transform::identity(), &target, &seed, &cfg).unwrap();
        if r.success {
            assert!(r.position_error < 1e-3 && r.axis_error <= cfg.axis_tol);
            ok += 1;
        }
    }
    assert!(ok >= 495, "{ok}/500");
}

#[test]
fn planar_reach_reproduces_annulus() {
    let (l1, l2) = (0.6, 0.4);
    let model = planar_2link(l1, l2);
    let cfg = ReachConfig { seed: 5, ..Default::default() };
    let (inner, outer) = (l1 - l2, l1 + l2);
    let mut disagreements = Vec::new();
    let n = 50;
    for i in 0..n {
        for j in 0..n {
            let x = -1.1 + 2.2 * i as f64 / (n - 1) as f64;
            let y = -1.1 + 2.2 * j as f64 / (n - 1) as f64;
            let r = (x * x + y * y).sqrt();
            if (r - inner).abs() <= 5e-3 || (r - outer).abs() <= 5e-3 {
                continue;
            }
            let target = TaskTarget::new(Vec3::new(x, y, 0.0), Vec3::z(), "grid").unwrap();
            let out = reach_check(&model, &Transform::identity(), &target, i * n + j, &[], None, &cfg);
            let expect = inner <= r && r <= outer;
            if out.reached != expect {
                disagreements.push((x, y, out.reached));
            }
        }
    }
    assert!(disagreements.is_empty(), "{disagreements:?}");
}

#[test]
fn shortfall_beyond_reach_is_distance_minus_radius() {
    let model = planar_2link(0.5, 0.5);
    for d in [1.3, 1.6, 2.0] {
        let target = TaskTarget::new(Vec3::new(d * 0.6, d * 0.8, 0.0), Vec3::z(), "far").unwrap();
        let out = reach_check(&model, &Transform::identity(), &target, 0, &[], None, &ReachConfig::default());
        assert!(!out.reached);
        assert_eq!(out.failure_reason, Some(FailureReason::IkFail));
        assert!((out.position_error - (d - 1.0)).abs() <= 5e-3, "{d}: {}", out.position_error);
    }
}

fn cube(center: Vec3, half: f64) -> AvoidanceRegion {
    let pts: Vec<Vec3> = (0..8)
        .map(|i| center + Vec3::new(if i & 1 == 1 { half } else { -half }, if i & 2 == 2 { half } else { -half }, if i & 4 == 4 { half } else { -half }))
        .collect();
    AvoidanceRegion { region_id: "block".into(), hull: quickhull(&pts).unwrap() }
}

#[test]
fn hull_across_the_joint_path_gives_path_collision() {
    let model = planar_2link(0.5, 0.5);
    let base = Transform::identity();
    let regions = vec![cube(Vec3::new(0.67, 0.67, 0.0), 0.03)];
    let prev = JointVector(vec![0.0, 0.0]);
    let target = TaskTarget::new(Vec3::new(0.0, 0.8, 0.0), Vec3::z(), "t").unwrap();

    // Both analytic solutions for r = 0.8: elbow angle ±acos(0.28).
    let q2 = (0.28f64).acos();
    let phi = (0.5 * q2.sin()).atan2(0.5 + 0.5 * q2.cos());
    let solutions = [[PI / 2.0 - phi, q2], [PI / 2.0 + phi, -q2]];
    for s in solutions {
        let end = JointVector(s.to_vec());
        assert!(!robot_in_collision(&model, &end, &base, &regions).unwrap());
        let blocked = (1..400).any(|k| {
            let t = k as f64 / 400.0;
            let q = JointVector(vec![s[0] * t, s[1] * t]);
            robot_in_collision(&model, &q, &base, &regions).unwrap()
        });
        assert!(blocked, "{s:?}");
    }
    assert!(!robot_in_collision(&model, &prev, &base, &regions).unwrap());

    let out = reach_check(&model, &base, &target, 0, &regions, Some(&prev), &ReachConfig::default());
    assert!(!out.reached);
    assert_eq!(out.failure_reason, Some(FailureReason::PathCollision));
    // Without the previous configuration there is no path to check.
    let free = reach_check(&model, &base, &target, 0, &regions, None, &ReachConfig::default());
    assert!(free.reached);
}

#[test]
fn reachable_target_without_obstacles() {
    let model = generic6r();
    let target = TaskTarget::new(Vec3::new(0.4, 0.1, 0.3), -Vec3::z(), "pick").unwrap();
    let out = reach_check(&model, &Transform::identity(), &target, 0, &[], None, &ReachConfig::default());
    assert!(out.reached);
    assert_eq!(out.position_error, 0.0);
    assert!(out.q_solution.is_some() && out.failure_reason.is_none());
}

fn in_limits(model: &RobotModel) -> impl Strategy<Value = Vec<f64>> {
    let ranges: Vec<_> = model.joints.iter().map(|j| j.limits[0]..j.limits[1]).collect();
    ranges
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fk_frames_are_proper_rotations(q in in_limits(&generic6r())) {
        let f = forward_kinematics(&generic6r(), &q).unwrap();
        for t in f.links.iter().chain(std::iter::once(&f.tool)) {
            let r = t.rotation.to_rotation_matrix().into_inner();
            prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).amax() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fk_undone_by_reverse_rotations(q in in_limits(&generic6r())) {
        let model = generic6r();
        let f = forward_kinematics(&model, &q).unwrap();
        // Peel the chain back off: inverse joint rotation, then inverse origin.
        let mut t = f.links[model.dof()];
        for (i, joint) in model.joints.iter().enumerate().rev() {
            let rot = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(joint.axis), -q[i]);
            t = t * Isometry3::from_parts(Translation3::identity(), rot) * joint.origin.to_isometry().inverse();
        }
        prop_assert!(t.translation.vector.norm() < 1e-12);
        prop_assert!(t.rotation.angle() < 1e-12);
    }

    #[test]
    fn ik_invariant_under_world_motion(
        q in in_limits(&generic6r()),
        dq in prop::collection::vec(-0.1..0.1f64, 6),
        t in (-2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64),
        angle in -3.0..3.0f64,
    ) {
        let model = generic6r();
        let target = tool_target(&model, &q);
        let mut seed: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + b).collect();
        model.clamp(&mut seed);
        let iso = Isometry3::from_parts(Translation3::new(t.0, t.1, t.2), UnitQuaternion::from_axis_angle(&Vec3::x_axis(), angle));
        let moved = TaskTarget::new(iso.transform_point(&target.position.into()).coords, iso.rotation * target.approach_axis, "t").unwrap();
        let a = solve_ik(&model, &Transform::identity(), &target, &seed, &IkConfig::default()).unwrap();
        let b = solve_ik(&model, &iso, &moved, &seed, &IkConfig::default()).unwrap();
        prop_assert_eq!(a.success, b.success);
        for (x, y) in a.q.iter().zip(b.q.iter()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn no_path_collision_without_previous(seed in any::<u64>(), x in -0.8..0.8f64, y in -0.8..0.8f64, z in 0.0..0.8f64) {
        let model = generic6r();
        let regions = vec![cube(Vec3::new(0.3, 0.0, 0.3), 0.1)];
        let target = TaskTarget::new(Vec3::new(x, y, z), -Vec3::z(), "t").unwrap();
        let cfg = ReachConfig { seed, restarts: 3, ..Default::default() };
        let out = reach_check(&model, &Transform::identity(), &target, 0, &regions, None, &cfg);
        prop_assert_ne!(out.failure_reason, Some(FailureReason::PathCollision));
        prop_assert_eq!(out.reached, out.failure_reason.is_none());
        prop_assert_eq!(out.reached, out.q_solution.is_some());
    }
}
