use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::tree::{
    HEAD, LEFT_COLLAR, LEFT_ELBOW, LEFT_SHOULDER, LEFT_WRIST, NECK, RIGHT_COLLAR, RIGHT_ELBOW,
    RIGHT_SHOULDER, RIGHT_WRIST,
};
use crate::body::{BodyModel, BodyShape, KinematicTree, PoseVector, Side, BODY_JOINTS};
use crate::geom::{axis_angle_to_matrix, RigidTransform, Rotation6D};
use crate::rng::derive_seed;

use super::SynthError;

/// Axis-aligned workspace for reach targets, pelvis-relative meters:
/// (lo, hi) per axis. x is lateral, y vertical, z forward.
pub const REACH_BOX: [(f64, f64); 3] = [(-0.6, 0.6), (-0.9, 0.9), (-0.1, 0.9)];

/// Forward lean (radians of spine pitch per meter of forward target
/// distance), split evenly over the three spine joints.
const LEAN_PITCH_PER_M: f64 = 0.45;

/// Default diversity jitter, degrees per rotational DOF on joints that do
/// not participate in wrist placement.
const JITTER_DEG_DEFAULT: f64 = 5.0;

/// A synthesized reaching pose and the bookkeeping of its IK solve.
#[derive(Debug, Clone)]
pub struct ReachPose {
    pub pose: PoseVector,
    /// False when the target lay outside the arm's reach annulus and the
    /// wrist was clamped onto the reach sphere.
    pub reachable: bool,
    /// The requested target.
    pub target: Point3<f64>,
    /// The target actually solved for (equals `target` when reachable).
    pub clamped_target: Point3<f64>,
    /// FK-verified distance between the wrist joint and `clamped_target`.
    pub wrist_error: f64,
}

/// Body-joint forward kinematics on the bare tree (hands stay rigid, which
/// is irrelevant for wrist placement).
fn body_fk(tree: &KinematicTree, pose: &PoseVector) -> Result<Vec<RigidTransform>, SynthError> {
    let mut out: Vec<RigidTransform> = Vec::with_capacity(BODY_JOINTS);
    for j in 0..BODY_JOINTS {
        let rot = pose
            .block(j)
            .to_matrix()
            .map_err(|e| crate::body::BodyError::BadBlock { joint: j, source: e })?;
        let local = RigidTransform::new(rot, tree.offset(j));
        let world = match tree.joints[j].parent {
            Some(p) => out[p].compose(&local),
            None => local,
        };
        out.push(world);
    }
    Ok(out)
}

fn set_block(pose: &mut PoseVector, j: usize, r: &Matrix3<f64>) {
    pose.set_block(j, &Rotation6D::from_matrix(r));
}

/// Rotation with `dir` as its forward (+z) column and roll chosen to keep
/// +y as upright as possible.
fn look_rotation(dir: &Vector3<f64>) -> Matrix3<f64> {
    let f = dir.normalize();
    let r = Vector3::y().cross(&f);
    if r.norm() < 1e-6 {
        // Looking straight up/down: fall back to the tilt that moves +z
        // onto `dir` along the shortest arc.
        return Rotation3::rotation_between(&Vector3::z(), &f)
            .unwrap_or_else(Rotation3::identity)
            .into_inner();
    }
    let r = r.normalize();
    let u = f.cross(&r);
    Matrix3::from_columns(&[r, u, f])
}

/// Joints that receive diversity jitter: everything that cannot disturb the
/// reaching wrist, i.e. the legs, the opposite arm, the reaching side's
/// collar (jittered before the IK solve) and the neck (before gaze).
fn jitter_joints(side: Side) -> Vec<usize> {
    let mut js = vec![NECK];
    match side {
        Side::Left => js.extend([LEFT_COLLAR, RIGHT_COLLAR, RIGHT_SHOULDER, RIGHT_ELBOW, RIGHT_WRIST]),
        Side::Right => js.extend([RIGHT_COLLAR, LEFT_COLLAR, LEFT_SHOULDER, LEFT_ELBOW, LEFT_WRIST]),
    }
    js.extend(14..22); // hips, knees, ankles, feet
    js.sort_unstable();
    js
}

/// Synthesize a reaching pose: spine lean proportional to forward target
/// distance, gaze at the target, analytic two-bone arm IK for the chosen
/// wrist, and seeded ±5° jitter on non-positioning joints.
pub fn gen_reach_pose(
    t_obj: &Point3<f64>,
    side: Side,
    shape: &BodyShape,
    seed: u64,
) -> Result<ReachPose, SynthError> {
    gen_reach_pose_with(t_obj, side, shape, seed, JITTER_DEG_DEFAULT)
}

/// As [`gen_reach_pose`] with an explicit jitter amplitude in degrees
/// (0 disables jitter entirely; the RNG is then never consulted).
pub fn gen_reach_pose_with(
    t_obj: &Point3<f64>,
    side: Side,
    shape: &BodyShape,
    seed: u64,
    jitter_deg: f64,
) -> Result<ReachPose, SynthError> {
    for (axis, (lo, hi)) in REACH_BOX.iter().enumerate() {
        if !(t_obj[axis] >= *lo && t_obj[axis] <= *hi) {
            return Err(SynthError::OutOfRange(t_obj.x, t_obj.y, t_obj.z));
        }
    }
    shape.validate()?;
    let tree = BodyModel::build_tree(shape);
    let mut pose = PoseVector::identity();

    // 1. Forward lean, split across the three spine joints.
    let pitch = LEAN_PITCH_PER_M * t_obj.z.max(0.0);
    if pitch > 0.0 {
        let r = axis_angle_to_matrix(&(Vector3::x() * (pitch / 3.0)));
        for j in 1..=3 {
            set_block(&mut pose, j, &r);
        }
    }

    // 2. Diversity jitter on joints outside the positioning chain. Applied
    //    before the gaze and IK solves so those stay exact.
    if jitter_deg > 0.0 {
        let amp = jitter_deg.to_radians();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "reach-jitter"));
        for j in jitter_joints(side) {
            let aa = Vector3::new(
                rng.gen_range(-amp..amp),
                rng.gen_range(-amp..amp),
                rng.gen_range(-amp..amp),
            );
            let base = pose.block(j).to_matrix().expect("identity/lean block");
            set_block(&mut pose, j, &(base * axis_angle_to_matrix(&aa)));
        }
    }

    // 3. Gaze: orient the head's forward axis at the target.
    let fk = body_fk(&tree, &pose)?;
    let head_pos = Point3::from(fk[HEAD].translation);
    let gaze = t_obj - head_pos;
    if gaze.norm() > 1e-6 {
        let local = fk[NECK].rotation.transpose() * look_rotation(&gaze);
        set_block(&mut pose, HEAD, &local);
    }

    // 4. Two-bone arm IK in the shoulder's parent frame.
    let (collar, shoulder, elbow, wrist) = match side {
        Side::Left => (LEFT_COLLAR, LEFT_SHOULDER, LEFT_ELBOW, LEFT_WRIST),
        Side::Right => (RIGHT_COLLAR, RIGHT_SHOULDER, RIGHT_ELBOW, RIGHT_WRIST),
    };
    let l1 = tree.offset(elbow).norm();
    let l2 = tree.offset(wrist).norm();
    let frame = fk[collar].rotation; // shoulder block applies in this frame
    let s_pos = fk[shoulder].translation;
    let t_loc = frame.transpose() * (t_obj.coords - s_pos);
    let dist = t_loc.norm();
    let reach_min = (l1 - l2).abs();
    let reach_max = l1 + l2;
    let reachable = dist >= reach_min && dist <= reach_max;
    let d = dist.clamp(reach_min.max(1e-6), reach_max);
    let a = tree.offset(elbow) / l1; // rest upper-arm direction (±x)
    let t_dir = if dist < 1e-9 { a } else { t_loc / dist };
    let clamped_target = Point3::from(s_pos + frame * (t_dir * d));

    // Elbow interior angle from the law of cosines; the hinge bends the
    // forearm toward the body's front.
    let cos_beta = ((l1 * l1 + l2 * l2 - d * d) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let bend = std::f64::consts::PI - cos_beta.acos();
    let e_axis = Vector3::y() * -side.x_sign();
    let r_e = axis_angle_to_matrix(&(e_axis * bend));
    set_block(&mut pose, elbow, &r_e);

    // Shoulder: rotate the elbow-bent wrist direction onto the target ray.
    let w0 = (a * l1 + r_e * (a * l2)).normalize();
    let r_s = match Rotation3::rotation_between(&w0, &t_dir) {
        Some(r) => r.into_inner(),
        // Antiparallel: half turn about the elbow hinge axis (⊥ w0).
        None => Rotation3::from_axis_angle(&Unit::new_normalize(e_axis), std::f64::consts::PI)
            .into_inner(),
    };
    set_block(&mut pose, shoulder, &r_s);

    // 5. Wrist orientation: keep the hand's distal axis along the forearm
    //    and face the palm (local −y) at the target.
    let fk = body_fk(&tree, &pose)?;
    let wrist_pos = fk[wrist].translation;
    let forearm = (wrist_pos - fk[elbow].translation).normalize();
    let to_obj = t_obj.coords - wrist_pos;
    let lateral = to_obj - forearm * to_obj.dot(&forearm);
    if lateral.norm() > 1e-6 {
        let palm = lateral.normalize();
        let c_x = forearm * side.x_sign();
        let c_y = -palm;
        let c_z = c_x.cross(&c_y);
        let w = Matrix3::from_columns(&[c_x, c_y, c_z]);
        set_block(&mut pose, wrist, &(fk[elbow].rotation.transpose() * w));
    }

    // 6. FK verification.
    let fk = body_fk(&tree, &pose)?;
    let wrist_error = (fk[wrist].translation - clamped_target.coords).norm();
    Ok(ReachPose {
        pose,
        reachable,
        target: *t_obj,
        clamped_target,
        wrist_error,
    })
}
