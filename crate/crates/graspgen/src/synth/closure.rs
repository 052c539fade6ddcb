use std::sync::OnceLock;

use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::tree::{FLEX_MAX, PALM_AXIS_END, PALM_AXIS_START, PALM_RADIUS};
use crate::body::{BodyShape, FingerDofs, HandGraspParams, HandModel, Side, HAND_JOINTS};
use crate::geom::{MeshQueryAccel, RigidTransform, Rotation6D, TriMesh};
use crate::rng::derive_seed;

use super::objects::{OBJECT_MAX_RADIUS, OBJECT_MIN_RADIUS};
use super::SynthError;

/// Surface distance below which a hand vertex counts as contacting.
pub const CONTACT_EPS: f64 = 0.002;
/// Hinge increment per closure step.
pub const CLOSURE_STEP: f64 = std::f64::consts::PI / 180.0;
/// Offset between the palm face and the object's support plane at placement,
/// negative meaning the palm presses into the surface. Palmar soft tissue
/// compresses a couple of millimeters under grasp load; emulating that press
/// with the rigid template gives the palm a realistic contact patch instead
/// of a single tangency point, while staying far inside the 5 mm
/// interpenetration budget.
pub const PALM_STANDOFF: f64 = -0.002;

/// Why a finger stopped closing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// A phalanx vertex came within [`CONTACT_EPS`] of the object surface.
    Contact,
    /// All flexion hinges reached their limits without touching.
    Limit,
}

/// A synthesized grasp with its contact statistics.
#[derive(Debug, Clone)]
pub struct ClosureGrasp {
    pub params: HandGraspParams,
    /// Hand vertices within [`CONTACT_EPS`] of the object surface
    /// (penetrating vertices included).
    pub contacts: usize,
    /// Stop reason per finger (thumb..pinky).
    pub stop: [StopReason; 5],
    /// Deepest penetration of any hand vertex into the object, meters.
    pub max_penetration: f64,
}

/// The neutral-shape hand templates, built once per process.
fn neutral_hand(side: Side) -> &'static HandModel {
    static HANDS: OnceLock<(HandModel, HandModel)> = OnceLock::new();
    let (left, right) = HANDS.get_or_init(|| {
        let shape = BodyShape::neutral();
        (HandModel::build(Side::Left, &shape), HandModel::build(Side::Right, &shape))
    });
    match side {
        Side::Left => left,
        Side::Right => right,
    }
}

/// Flexion dof column for each closure stage (proximal, middle, distal);
/// column 1 is abduction and never driven by closure.
const STAGE_DOF: [usize; 3] = [0, 2, 3];

/// Minimum summed skin weight the hinge's chain must exert on a vertex for
/// that vertex to be monitored during a closure stage.
const STAGE_WEIGHT_MIN: f64 = 0.15;
/// At or above this chain weight a vertex effectively rides the hinge and
/// must stop it the moment it touches. Lighter blends (palm edges, adjacent
/// fingers) move only fractionally, so they stop a hinge only on contacts
/// that appear during the stage itself — contacts they brought into the
/// stage (e.g. the palm resting on the surface) don't freeze the finger.
const STAGE_WEIGHT_RIGID: f64 = 0.5;

/// Monitored vertices for one closure stage.
struct StageSet {
    verts: Vec<usize>,
    /// Parallel to `verts`: chain weight at least [`STAGE_WEIGHT_RIGID`].
    rigid: Vec<bool>,
}

/// Monitored vertex sets per finger (thumb..pinky) and stage (prox/mid/dist):
/// stage `s` of finger `f` drives joints `3f+s .. 3f+2`, and a vertex is
/// watched when its summed skin weight over those joints clears the floor.
fn stage_vertex_sets(hand: &HandModel) -> [[StageSet; 3]; 5] {
    let mut sets: [[StageSet; 3]; 5] = std::array::from_fn(|_| {
        std::array::from_fn(|_| StageSet { verts: Vec::new(), rigid: Vec::new() })
    });
    for (i, s) in hand.skin.iter().enumerate() {
        // Weight on each individual finger joint.
        let mut per_joint = [0f64; HAND_JOINTS];
        for slot in 0..4 {
            let j = s.joints[slot] as usize;
            if s.weights[slot] > 0.0 && j < HAND_JOINTS {
                per_joint[j] += s.weights[slot];
            }
        }
        for f in 0..5 {
            let mut chain = 0.0;
            for (stage, set) in sets[f].iter_mut().enumerate().rev() {
                chain += per_joint[3 * f + stage];
                if chain >= STAGE_WEIGHT_MIN {
                    set.verts.push(i);
                    set.rigid.push(chain >= STAGE_WEIGHT_RIGID);
                }
            }
        }
    }
    sets
}

/// Advance one flexion hinge in 1° steps until a monitored vertex touches
/// the surface or the hinge reaches its limit. Steps that provably cannot
/// bring any monitored vertex into the contact shell are batched: a vertex
/// at distance `r` from the hinge pivot moves at most `r`·1° per step, so
/// `clearance / (r_max·1°)` increments need no intermediate checks.
fn close_stage(
    hand: &HandModel,
    accel: &MeshQueryAccel,
    side: Side,
    root: &RigidTransform,
    dofs: &mut FingerDofs,
    f: usize,
    stage: usize,
    set: &StageSet,
) -> Result<StopReason, SynthError> {
    let dof_idx = STAGE_DOF[stage];
    let mut exempt: Vec<bool> = Vec::new();
    let mut first = true;
    loop {
        let theta = dofs.to_blocks(side);
        let verts = hand.skinned_subset(&theta, root, &set.verts)?;
        // Exact distance where the accelerator's bound can't rule contact
        // out; the minimum over both kinds stays a valid clearance bound.
        let mut min_dist = f64::INFINITY;
        let mut hit = false;
        for (k, v) in verts.iter().enumerate() {
            let lb = accel.lower_bound(v);
            let d = if lb > CONTACT_EPS { lb } else { accel.distance(v).distance };
            min_dist = min_dist.min(d);
            let touching = d <= CONTACT_EPS;
            if first {
                exempt.push(touching && !set.rigid[k]);
            }
            if touching && !exempt[k] {
                hit = true;
            }
        }
        first = false;
        if hit {
            return Ok(StopReason::Contact);
        }
        let cur = dofs.dof[f][dof_idx];
        if cur >= FLEX_MAX - 1e-12 {
            return Ok(StopReason::Limit);
        }
        let joints = hand.joint_transforms(&theta, root)?;
        let pivot = joints[3 * f + stage].translation;
        let r_max = verts
            .iter()
            .map(|v| (v.coords - pivot).norm())
            .fold(1e-6, f64::max);
        let clear = (min_dist - CONTACT_EPS).max(0.0);
        let steps = ((clear / (r_max * CLOSURE_STEP)) as usize).max(1);
        dofs.dof[f][dof_idx] = (cur + steps as f64 * CLOSURE_STEP).min(FLEX_MAX);
    }
}

fn contact_stats(accel: &MeshQueryAccel, verts: &[Point3<f64>]) -> (usize, f64) {
    let mut contacts = 0usize;
    let mut max_pen = 0f64;
    for v in verts {
        if accel.lower_bound(v) > CONTACT_EPS {
            continue;
        }
        let d = accel.distance(v).distance;
        let inside = accel.contains(v);
        if d <= CONTACT_EPS || inside {
            contacts += 1;
        }
        if inside {
            max_pen = max_pen.max(d);
        }
    }
    (contacts, max_pen)
}

/// Close the fingers of a hand already posed at `root` around the object.
/// Each finger wraps in a proximal→middle→distal cascade: a hinge advances
/// in 1° steps until a vertex it drives comes within [`CONTACT_EPS`] of the
/// surface or the hinge hits its limit, then the next hinge takes over. A
/// finger's stop reason is `Contact` when any of its stages ended on touch.
pub fn gen_closure_grasp_at(
    object: &TriMesh,
    side: Side,
    root: &RigidTransform,
) -> Result<ClosureGrasp, SynthError> {
    let accel = MeshQueryAccel::new(object.clone());
    let hand = neutral_hand(side);
    let sets = stage_vertex_sets(hand);

    let mut dofs = FingerDofs::flat();
    let mut stop = [StopReason::Limit; 5];
    for f in 0..5 {
        let mut touched = false;
        for stage in 0..3 {
            let reason =
                close_stage(hand, &accel, side, root, &mut dofs, f, stage, &sets[f][stage])?;
            touched |= reason == StopReason::Contact;
        }
        if touched {
            stop[f] = StopReason::Contact;
        }
    }

    let posed = hand.skinned(&dofs.to_blocks(side), root)?;
    let (contacts, max_penetration) = contact_stats(&accel, &posed.vertices);
    let params = HandGraspParams::from_dofs(
        &dofs,
        root.translation,
        Rotation6D::from_matrix(&root.rotation),
        side,
    );
    Ok(ClosureGrasp { params, contacts, stop, max_penetration })
}

/// Synthesize a grasp: pose the palm against the object along a seeded
/// approach direction, then close the fingers until contact or limits.
/// The object must sit in its own frame (the returned wrist transform is
/// expressed relative to it).
pub fn gen_closure_grasp(
    object: &TriMesh,
    side: Side,
    seed: u64,
) -> Result<ClosureGrasp, SynthError> {
    let (center, radius) = object.bounding_sphere();
    if radius > OBJECT_MAX_RADIUS {
        return Err(SynthError::ObjectTooLarge(radius));
    }
    if radius < OBJECT_MIN_RADIUS {
        return Err(SynthError::ObjectTooSmall(radius));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "closure-approach"));
    let mut u = random_unit(&mut rng);
    let roll = rng.gen_range(0.0..std::f64::consts::TAU);

    // Approach along the surface: snap to the closest outward face normal
    // within ~60°, so the palm presses flat onto a face instead of catching
    // a corner or edge. On finely tessellated surfaces this barely moves u;
    // on a box it covers every draw (a corner diagonal is 54.7° from its
    // adjacent face normals).
    let mut best_dot = 0.5;
    for f in &object.faces {
        let (a, b, c) = (
            object.vertices[f[0] as usize],
            object.vertices[f[1] as usize],
            object.vertices[f[2] as usize],
        );
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len < 1e-12 {
            continue;
        }
        let d = n.dot(&u) / len;
        if d > best_dot {
            best_dot = d;
            u = n / len;
        }
    }

    // Palm faces the object center: local +y maps onto the approach
    // direction, fingers point along a tangent. Among rolled tangent
    // candidates, prefer closing across the object's smallest footprint —
    // the way a hand naturally wraps the thin side of a box or the shaft of
    // a cylinder — then jitter for diversity.
    let pivot = if u.y.abs() < 0.9 { Vector3::y() } else { Vector3::x() };
    let t0 = pivot.cross(&u).normalize();
    let t1 = u.cross(&t0);
    let tangent_at = |phi: f64| t0 * phi.cos() + t1 * phi.sin();
    let mut best = (f64::INFINITY, roll);
    for k in 0..16 {
        let phi = roll + k as f64 * std::f64::consts::TAU / 16.0;
        let f = tangent_at(phi);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &object.vertices {
            let s = (v - center).dot(&f);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if hi - lo < best.0 {
            best = (hi - lo, phi);
        }
    }
    let jitter = rng.gen_range(-0.26..0.26);
    let fingers = tangent_at(best.1 + jitter);
    let c_x = fingers * side.x_sign();
    let c_y = u;
    let c_z = c_x.cross(&c_y);
    let r_h = Matrix3::from_columns(&[c_x, c_y, c_z]);

    // Rest the palm face on the support plane of the object along `u`.
    let support = object
        .vertices
        .iter()
        .map(|v| (v - center).dot(&u))
        .fold(f64::NEG_INFINITY, f64::max);
    let anchor = center + u * (support + PALM_STANDOFF);
    let palm_local = Vector3::new(
        side.x_sign() * (PALM_AXIS_START[0] + PALM_AXIS_END[0]) / 2.0,
        -PALM_RADIUS,
        0.0,
    );
    let t_h = anchor.coords - r_h * palm_local;

    gen_closure_grasp_at(object, side, &RigidTransform::new(r_h, t_h))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
