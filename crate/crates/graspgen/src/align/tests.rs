use std::sync::OnceLock;

use approx::assert_relative_eq;
use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::{BodyModel, BodyShape, FingerDofs, HandGraspParams, PoseVector, Side};
use crate::geom::{
    axis_angle_to_matrix, kabsch, MeshQueryAccel, RigidTransform, Rotation6D, TriMesh,
};
use crate::synth::{
    gen_closure_grasp, gen_reach_pose, procedural_object, ObjectKind, CONTACT_EPS,
};

use super::*;

fn model() -> &'static BodyModel {
    static MODEL: OnceLock<BodyModel> = OnceLock::new();
    MODEL.get_or_init(|| BodyModel::build(&BodyShape::neutral()).expect("neutral template"))
}

/// Palm vertices of a flat standalone hand, wrist at the origin.
fn flat_palm(side: Side) -> Vec<Point3<f64>> {
    let hand = model().hand(side);
    let mesh = hand.posed_mesh(&HandGraspParams::flat_hand(side)).unwrap();
    hand.palm_indices().iter().map(|&i| mesh.vertices[i]).collect()
}

fn random_rigid(rng: &mut impl Rng, max_angle: f64, max_trans: f64) -> RigidTransform {
    let axis = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    )
    .normalize();
    let angle = rng.gen_range(0.1..max_angle);
    let t = Vector3::new(
        rng.gen_range(-max_trans..max_trans),
        rng.gen_range(-max_trans..max_trans),
        rng.gen_range(-max_trans..max_trans),
    );
    RigidTransform::new(axis_angle_to_matrix(&(axis * angle)), t)
}

fn geodesic(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (((a.transpose() * b).trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

#[test]
fn coincident_palms_align_with_identity_and_zero_energy() {
    let pts = flat_palm(Side::Right);
    let a = align_palm(&pts, &pts).unwrap();
    assert_relative_eq!(a.transform.rotation, Matrix3::identity(), epsilon = 1e-10);
    assert!(a.transform.translation.norm() < 1e-10);
    assert!(a.energy < 1e-10, "energy {}", a.energy);
    assert!(a.converged);
}

#[test]
fn recovers_sampled_rigid_motion_on_palm_vertices() {
    let pts = flat_palm(Side::Right);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let truth = random_rigid(&mut rng, 2.5, 0.8);
        let moved: Vec<_> = pts.iter().map(|p| truth.apply_point(p)).collect();
        let a = align_palm(&pts, &moved).unwrap();
        assert!(geodesic(&a.transform.rotation, &truth.rotation) < 1e-5);
        assert!((a.transform.translation - truth.translation).norm() < 1e-6);
        assert!(a.energy < 1e-6, "energy {}", a.energy);
        assert!(a.converged);
    }
}

#[test]
fn one_outlier_hurts_the_robust_fit_no_more_than_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut robust_total = 0.0;
    let mut l2_total = 0.0;
    for _ in 0..20 {
        // Palm-scale cloud: 50 exact correspondences, one displaced 5 cm.
        let src: Vec<Point3<f64>> = (0..50)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                )
            })
            .collect();
        let truth = random_rigid(&mut rng, 2.0, 0.5);
        let mut dst: Vec<_> = src.iter().map(|p| truth.apply_point(p)).collect();
        let k = rng.gen_range(0..dst.len());
        let dir = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        dst[k] += dir * 0.05;

        let robust = align_palm(&src, &dst).unwrap().transform;
        let l2 = kabsch(&src, &dst).unwrap();
        let robust_err = geodesic(&robust.rotation, &truth.rotation);
        let l2_err = geodesic(&l2.rotation, &truth.rotation);
        assert!(
            robust_err <= l2_err + 1e-12,
            "robust {robust_err} worse than least squares {l2_err}"
        );
        robust_total += robust_err;
        l2_total += l2_err;
    }
    // And strictly better in aggregate, not merely tied.
    assert!(robust_total < l2_total * 0.5, "robust {robust_total}, l2 {l2_total}");
}

#[test]
fn degenerate_correspondences_are_rejected() {
    let pts = flat_palm(Side::Right);
    let shorter = pts[..pts.len() - 1].to_vec();
    assert!(matches!(
        align_palm(&pts, &shorter),
        Err(AlignError::DegenerateCorrespondences(_))
    ));

    let two = &pts[..2];
    assert!(matches!(
        align_palm(two, two),
        Err(AlignError::DegenerateCorrespondences(_))
    ));

    let line: Vec<Point3<f64>> = (0..10)
        .map(|i| Point3::new(0.01 * i as f64, 0.02 * i as f64, -0.005 * i as f64))
        .collect();
    assert!(matches!(
        align_palm(&line, &line),
        Err(AlignError::DegenerateCorrespondences(_))
    ));
}

#[test]
fn returned_rotation_is_always_proper_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for _ in 0..10 {
        let src: Vec<Point3<f64>> = (0..30)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-0.1..0.1),
                    rng.gen_range(-0.1..0.1),
                )
            })
            .collect();
        // A mirrored target tempts the solver toward an improper map.
        let dst: Vec<_> = src
            .iter()
            .map(|p| {
                Point3::new(
                    -p.x + rng.gen_range(-0.002..0.002),
                    p.y + rng.gen_range(-0.002..0.002),
                    p.z + rng.gen_range(-0.002..0.002),
                )
            })
            .collect();
        let a = align_palm(&src, &dst).unwrap();
        let r = a.transform.rotation;
        assert!((r.determinant() - 1.0).abs() < 1e-6);
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-6);
    }
}

#[test]
fn irls_energy_is_no_worse_than_the_least_squares_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let src: Vec<Point3<f64>> = (0..40)
        .map(|_| {
            Point3::new(
                rng.gen_range(-0.06..0.06),
                rng.gen_range(-0.06..0.06),
                rng.gen_range(-0.06..0.06),
            )
        })
        .collect();
    let truth = random_rigid(&mut rng, 1.5, 0.3);
    let mut dst: Vec<_> = src.iter().map(|p| truth.apply_point(p)).collect();
    for d in dst.iter_mut().take(4) {
        d.x += 0.08;
        d.z -= 0.03;
    }
    for d in dst.iter_mut() {
        d.y += rng.gen_range(-0.001..0.001);
    }

    let seed_energy = mean_distance(&kabsch(&src, &dst).unwrap(), &src, &dst);
    let a = align_palm(&src, &dst).unwrap();
    assert!(a.energy <= seed_energy + 1e-15);
    assert!(a.iterations >= 1);
    assert!(a.converged);
}

/// A grasp whose object frame already coincides with the world: flat hand
/// placed exactly where the identity-pose body's wrist rests.
fn coincident_grasp(side: Side) -> HandGraspParams {
    let wrist = model().rest_positions()[side.wrist()];
    HandGraspParams::from_dofs(&FingerDofs::flat(), wrist.coords, Rotation6D::identity(), side)
}

#[test]
fn assemble_leaves_object_unmoved_when_frames_coincide() {
    let body = model();
    let pose = PoseVector::identity();
    let t_b = Vector3::zeros();
    let grasp = coincident_grasp(Side::Right);
    let object = procedural_object(ObjectKind::Sphere, 0.03);

    let provenance = SceneProvenance {
        target: {
            let w = body.rest_positions()[Side::Right.wrist()];
            [w.x, w.y, w.z]
        },
        ..SceneProvenance::default()
    };
    let scene =
        assemble_grasp(body, &pose, &t_b, &grasp, object.clone(), provenance).unwrap();

    // Template vertices are quantized to float32 after the hands are
    // welded onto the body, so the two palm copies disagree by a few
    // nanometers; the recovered transform inherits that noise floor.
    let t = scene.object_rigid();
    assert_relative_eq!(t.rotation, Matrix3::identity(), epsilon = 1e-7);
    assert!(t.translation.norm() < 1e-7, "translation {}", t.translation.norm());
    assert!(scene.align_energy < 1e-7);
    assert!(scene.align_converged);
    assert!(!scene.low_quality);

    let world = scene.object_world();
    for (a, b) in world.vertices.iter().zip(&object.vertices) {
        assert!((a - b).norm() < 1e-7);
    }
}

#[test]
fn rerooting_the_body_moves_the_object_by_exactly_that_transform() {
    let body = model();
    let target = Point3::new(0.35, 0.45, 0.3);
    let reach = gen_reach_pose(&target, Side::Right, &BodyShape::neutral(), 5).unwrap();
    let object = procedural_object(ObjectKind::Sphere, 0.045);
    let grasp = gen_closure_grasp(&object, Side::Right, 7).unwrap();
    let provenance = SceneProvenance {
        target: [target.x, target.y, target.z],
        ..SceneProvenance::default()
    };

    let t_b = Vector3::zeros();
    let base = assemble_grasp(body, &reach.pose, &t_b, &grasp.params, object.clone(), provenance.clone())
        .unwrap();

    let g = RigidTransform::new(
        axis_angle_to_matrix(&Vector3::new(0.3, 1.1, -0.7)),
        Vector3::new(0.4, -0.2, 0.9),
    );
    let mut pose2 = reach.pose.clone();
    let pelvis = pose2.block(0).to_matrix().unwrap();
    pose2.set_block(0, &Rotation6D::from_matrix(&(g.rotation * pelvis)));
    let t_b2 = g.rotation * t_b + g.translation;

    let moved = assemble_grasp(body, &pose2, &t_b2, &grasp.params, object, provenance).unwrap();

    let expected = g.compose(&base.object_rigid());
    let got = moved.object_rigid();
    assert_relative_eq!(got.rotation, expected.rotation, epsilon = 1e-9);
    assert!((got.translation - expected.translation).norm() < 1e-9);
    assert!((moved.align_energy - base.align_energy).abs() < 1e-12);

    for (a, b) in moved.object_world().vertices.iter().zip(&base.object_world().vertices) {
        assert!((a - g.apply_point(b)).norm() < 1e-9);
    }
}

#[test]
fn assembly_welds_a_closure_grasp_onto_a_reach_pose_without_losing_contact() {
    let body = model();
    let target = Point3::new(0.4, 0.5, 0.25);
    let side = Side::Right;
    let reach = gen_reach_pose(&target, side, &BodyShape::neutral(), 3).unwrap();
    assert!(reach.reachable);

    let object = procedural_object(ObjectKind::Sphere, 0.045);
    let grasp = gen_closure_grasp(&object, side, 7).unwrap();
    assert!(grasp.contacts > 40);

    let provenance = SceneProvenance {
        object_kind: ObjectKind::Sphere,
        object_radius: 0.045,
        target: [target.x, target.y, target.z],
        ..SceneProvenance::default()
    };
    let t_b = Vector3::zeros();
    let scene =
        assemble_grasp(body, &reach.pose, &t_b, &grasp.params, object, provenance).unwrap();

    // The same hand geometry appears on both sides of the correspondence,
    // so the weld is an exact rigid motion.
    assert!(scene.align_energy < 1e-9, "energy {}", scene.align_energy);
    assert!(scene.align_converged);
    assert!(!scene.low_quality, "wrist should reach the conditioning target");

    // Contacts established in the grasp frame survive into the world: count
    // posed-body hand vertices against the transported object.
    let posed = scene.posed_body(body).unwrap();
    let offset = body.hand_vertex_offset(side);
    let count = body.hand(side).mesh.vertices.len();
    let accel = MeshQueryAccel::new(scene.object_world());
    let mut contacts = 0usize;
    let mut tip_within_5mm = false;
    for v in &posed.vertices[offset..offset + count] {
        let d = accel.distance(v).distance;
        if d <= CONTACT_EPS || accel.contains(v) {
            contacts += 1;
        }
        if d <= 0.005 {
            tip_within_5mm = true;
        }
    }
    assert!(contacts > 40, "only {contacts} contacts after assembly");
    assert!(tip_within_5mm);
}

#[test]
fn low_quality_flag_trips_on_distant_targets_and_respects_the_threshold() {
    let body = model();
    let pose = PoseVector::identity();
    let t_b = Vector3::zeros();
    let grasp = coincident_grasp(Side::Right);
    let object = procedural_object(ObjectKind::Sphere, 0.03);

    let far = SceneProvenance { target: [10.0, 0.0, 0.0], ..SceneProvenance::default() };
    let flagged =
        assemble_grasp(body, &pose, &t_b, &grasp, object.clone(), far.clone()).unwrap();
    assert!(flagged.low_quality);

    let relaxed =
        assemble_grasp_with(body, &pose, &t_b, &grasp, object, far, f64::INFINITY).unwrap();
    assert!(!relaxed.low_quality);
}

/// An identity-pose scene actually holding a sphere in the chosen hand.
fn held_sphere_scene(side: Side, t_b: Vector3<f64>) -> GraspScene {
    let body = model();
    let pose = PoseVector::identity();
    let object = procedural_object(ObjectKind::Sphere, 0.045);
    let grasp = gen_closure_grasp(&object, side, 7).unwrap();
    let wrist = body.rest_positions()[side.wrist()] + t_b;
    let provenance = SceneProvenance {
        object_kind: ObjectKind::Sphere,
        object_radius: 0.045,
        target: [wrist.x, wrist.y, wrist.z],
        ..SceneProvenance::default()
    };
    assemble_grasp(body, &pose, &t_b, &grasp.params, object, provenance).unwrap()
}

#[test]
fn mirroring_moves_the_object_to_the_opposite_wrist() {
    let body = model();
    let t_b = Vector3::new(0.3, 0.1, -0.2);
    let scene = held_sphere_scene(Side::Right, t_b);
    let mirrored = mirror_grasp(&scene);
    assert_eq!(mirrored.side(), Side::Left);

    let joints = body.joint_positions(&scene.pose, &t_b).unwrap();
    let left = joints[Side::Left.wrist()];
    let right = joints[Side::Right.wrist()];

    let centroid = scene.object_world().centroid();
    let centroid_m = mirrored.object_world().centroid();
    assert!((centroid - right).norm() < (centroid - left).norm());
    assert!((centroid_m - left).norm() < (centroid_m - right).norm());
    // The identity-pose body is left/right symmetric, so the mirrored
    // object sits exactly as far from the left wrist as the original did
    // from the right.
    assert!(((centroid_m - left).norm() - (centroid - right).norm()).abs() < 1e-9);
}

#[test]
fn mirroring_twice_restores_the_scene() {
    let scene = held_sphere_scene(Side::Right, Vector3::new(0.05, 0.0, 0.4));
    let twice = mirror_grasp(&mirror_grasp(&scene));

    assert_eq!(twice.side(), scene.side());
    for (row_a, row_b) in twice.object_transform.iter().zip(&scene.object_transform) {
        for (a, b) in row_a.iter().zip(row_b) {
            assert!((a - b).abs() < 1e-9, "object transform drifted: {a} vs {b}");
        }
    }
    for (a, b) in twice.grasp.to_vec99().iter().zip(scene.grasp.to_vec99()) {
        assert!((a - b).abs() < 1e-9, "grasp params drifted: {a} vs {b}");
    }
    assert_eq!(twice.pose, scene.pose);
    assert_eq!(twice.t_b, scene.t_b);
}

#[test]
fn mirroring_preserves_fingertip_object_distances() {
    let body = model();
    // Asymmetric body with a rotated pelvis so the sagittal plane is not an
    // axis plane.
    let target = Point3::new(0.3, 0.55, 0.35);
    let reach = gen_reach_pose(&target, Side::Right, &BodyShape::neutral(), 9).unwrap();
    let object = procedural_object(ObjectKind::Cylinder, 0.05);
    let grasp = gen_closure_grasp(&object, Side::Right, 4).unwrap();
    let provenance = SceneProvenance {
        object_kind: ObjectKind::Cylinder,
        object_radius: 0.05,
        target: [target.x, target.y, target.z],
        ..SceneProvenance::default()
    };
    let scene = assemble_grasp(
        body,
        &reach.pose,
        &Vector3::new(0.1, 0.0, -0.3),
        &grasp.params,
        object,
        provenance,
    )
    .unwrap();
    let mirrored = mirror_grasp(&scene);

    let tips_of = |s: &GraspScene| -> Vec<Point3<f64>> {
        let root = RigidTransform::new(
            s.grasp.r_h_block().to_matrix().unwrap(),
            s.grasp.t_h_vec(),
        );
        let in_object_frame = model()
            .hand(s.side())
            .fingertip_positions(&s.grasp.theta_blocks(), &root)
            .unwrap();
        let t = s.object_rigid();
        in_object_frame.iter().map(|p| t.apply_point(p)).collect()
    };

    let world = scene.object_world();
    let world_m = mirrored.object_world();
    for (tip, tip_m) in tips_of(&scene).iter().zip(tips_of(&mirrored)) {
        let d = crate::geom::point_mesh_distance(&world, tip).distance;
        let d_m = crate::geom::point_mesh_distance(&world_m, &tip_m).distance;
        assert!((d - d_m).abs() < 1e-6, "distance changed: {d} vs {d_m}");
    }
}

#[test]
fn scene_json_roundtrips_and_rebuilds_the_object() {
    let scene = held_sphere_scene(Side::Right, Vector3::zeros());
    let json = scene.to_json().unwrap();

    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["object_transform"].as_array().unwrap().len(), 4);
    assert_eq!(v["object_transform"][0].as_array().unwrap().len(), 4);
    assert_eq!(v["object_transform"][3][3], serde_json::json!(1.0));
    assert_eq!(v["pose"].as_array().unwrap().len(), 132);
    assert!(v.get("object").is_none(), "mesh must not be serialized");
    assert!(v["provenance"]["object_kind"].is_string());

    let back = GraspScene::from_json(&json).unwrap();
    assert_eq!(back, scene);
    assert_eq!(back.object.vertices.len(), scene.object.vertices.len());
}
