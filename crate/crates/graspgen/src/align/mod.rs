//! Welding a generated hand grasp onto a diffused body pose.
//!
//! The grasp stage expresses the hand in the *object frame* (object at its
//! own origin, wrist placed by `(R_h, t_h)`). The body stage produces a
//! world-frame pose whose finger articulation we overwrite with the grasp's.
//! The weld solves for the single rigid transform that carries the grasp
//! hand's palm vertices onto the posed body's palm vertices and then moves
//! the *object* by that same transform — finger articulation is never
//! touched, and the body never moves.
//!
//! The palm fit minimizes the mean unsquared per-vertex distance (a robust
//! L1 aggregation over vertices, unlike ordinary least squares) via IRLS
//! over closed-form weighted Kabsch solves: monotone, derivative-free and
//! deterministic.
//!
//! [`mirror_grasp`] builds the "wrong hand" pseudo-scene used for negative
//! conditioning: hand parameters and object transform are reflected across
//! the body's sagittal plane while the body itself stays fixed.

mod scene;

pub use scene::{GraspScene, SceneProvenance};

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

use crate::body::{BodyError, BodyModel, HandGraspParams, PoseVector, Side};
use crate::geom::{weighted_kabsch, GeomError, RigidTransform, Rotation6D, TriMesh};

/// IRLS iteration cap; running out returns the best iterate un-`converged`.
pub const IRLS_MAX_ITERS: usize = 50;
/// Stop once the energy improvement over one iteration drops below this.
pub const IRLS_TOL: f64 = 1e-7;
/// Residual floor inside the IRLS weight `1 / max(r_i, floor)`.
pub const IRLS_WEIGHT_FLOOR: f64 = 1e-4;
/// A scene whose body wrist sits farther than this from the conditioning
/// object location is flagged low-quality (meters).
pub const LOW_QUALITY_WRIST_DIST: f64 = 0.25;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("degenerate palm correspondences: {0}")]
    DegenerateCorrespondences(String),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("scene JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Result of the palm-correspondence fit.
#[derive(Debug, Clone, Copy)]
pub struct PalmAlignment {
    /// Rigid map from the grasp (object) frame into the world frame.
    pub transform: RigidTransform,
    /// Mean per-vertex distance at `transform` (meters).
    pub energy: f64,
    /// False when the iteration cap was hit before the energy settled; the
    /// best iterate is still returned.
    pub converged: bool,
    /// IRLS iterations actually run (0 = the least-squares seed was final).
    pub iterations: usize,
}

/// Mean unsquared correspondence distance `E(T) = (1/|V|) Σ ‖T·s_i − d_i‖`.
fn mean_distance(t: &RigidTransform, src: &[Point3<f64>], dst: &[Point3<f64>]) -> f64 {
    let total: f64 = src
        .iter()
        .zip(dst)
        .map(|(s, d)| (t.apply_point(s) - d).norm())
        .sum();
    total / src.len() as f64
}

/// True when the centered scatter of `pts` has (numerical) rank < 2, i.e.
/// the points are collinear or coincident and cannot pin a rotation.
fn collinear(pts: &[Point3<f64>]) -> bool {
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut scatter = Matrix3::zeros();
    for p in pts {
        let c = p.coords - mean;
        scatter += c * c.transpose();
    }
    let mut ev: Vec<f64> = scatter.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[1] <= ev[0].max(f64::MIN_POSITIVE) * 1e-12
}

/// Fit the proper rigid transform carrying `hand_palm[i]` onto
/// `body_palm[i]` (index-wise correspondence), minimizing the mean
/// unsquared per-vertex distance.
///
/// A plain Kabsch solve (least squares) seeds the iteration; IRLS with
/// weights `1 / max(r_i, 1e-4)` then reduces the robust energy, stopping
/// when an iteration improves it by less than `1e-7`. Every accepted
/// iterate has energy ≤ its predecessor's; a reweighted solve that would
/// raise the energy is discarded and the previous iterate kept, so the
/// returned transform is always the best one seen.
pub fn align_palm(
    hand_palm: &[Point3<f64>],
    body_palm: &[Point3<f64>],
) -> Result<PalmAlignment, AlignError> {
    if hand_palm.len() != body_palm.len() {
        return Err(AlignError::DegenerateCorrespondences(format!(
            "cardinality mismatch: {} hand vs {} body vertices",
            hand_palm.len(),
            body_palm.len()
        )));
    }
    if hand_palm.len() < 3 {
        return Err(AlignError::DegenerateCorrespondences(format!(
            "need at least 3 correspondences, got {}",
            hand_palm.len()
        )));
    }
    if collinear(hand_palm) || collinear(body_palm) {
        return Err(AlignError::DegenerateCorrespondences(
            "point set is collinear; rotation underdetermined".into(),
        ));
    }
    let degenerate = |e: GeomError| AlignError::DegenerateCorrespondences(e.to_string());

    let mut current = weighted_kabsch(hand_palm, body_palm, &vec![1.0; hand_palm.len()])
        .map_err(degenerate)?;
    let mut energy = mean_distance(&current, hand_palm, body_palm);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=IRLS_MAX_ITERS {
        let weights: Vec<f64> = hand_palm
            .iter()
            .zip(body_palm)
            .map(|(s, d)| {
                let r = (current.apply_point(s) - d).norm();
                1.0 / r.max(IRLS_WEIGHT_FLOOR)
            })
            .collect();
        let candidate = weighted_kabsch(hand_palm, body_palm, &weights).map_err(degenerate)?;
        let cand_energy = mean_distance(&candidate, hand_palm, body_palm);

        if cand_energy > energy {
            // The reweighted solve no longer improves the robust energy:
            // treat the previous iterate as the scheme's fixed point.
            converged = true;
            break;
        }
        let delta = energy - cand_energy;
        assert!(delta >= 0.0, "IRLS energy increased: {energy} -> {cand_energy}");
        current = candidate;
        energy = cand_energy;
        iterations = it;
        if delta < IRLS_TOL {
            converged = true;
            break;
        }
    }

    Ok(PalmAlignment { transform: current, energy, converged, iterations })
}

fn split_hand_thetas(
    side: Side,
    theta: &[Rotation6D],
) -> (Option<&[Rotation6D]>, Option<&[Rotation6D]>) {
    match side {
        Side::Left => (Some(theta), None),
        Side::Right => (None, Some(theta)),
    }
}

/// Weld `grasp` (hand expressed in the object frame) onto the body pose:
/// the body is posed with the grasp's finger articulation substituted into
/// the matching hand, the grasp hand's palm vertices are aligned onto the
/// posed body's, and the object is carried into the world by that same
/// transform. Inputs are never mutated; the scene is a pure construction.
///
/// The body wrist is compared against the conditioning object location in
/// `provenance.target`; scenes where it is farther than
/// [`LOW_QUALITY_WRIST_DIST`] are flagged `low_quality` (use
/// [`assemble_grasp_with`] to change the threshold).
pub fn assemble_grasp(
    body: &BodyModel,
    pose: &PoseVector,
    t_b: &Vector3<f64>,
    grasp: &HandGraspParams,
    object: TriMesh,
    provenance: SceneProvenance,
) -> Result<GraspScene, AlignError> {
    assemble_grasp_with(body, pose, t_b, grasp, object, provenance, LOW_QUALITY_WRIST_DIST)
}

/// [`assemble_grasp`] with an explicit low-quality wrist-distance threshold
/// (meters); pass `f64::INFINITY` to disable the flag.
#[allow(clippy::too_many_arguments)]
pub fn assemble_grasp_with(
    body: &BodyModel,
    pose: &PoseVector,
    t_b: &Vector3<f64>,
    grasp: &HandGraspParams,
    object: TriMesh,
    provenance: SceneProvenance,
    wrist_dist_threshold: f64,
) -> Result<GraspScene, AlignError> {
    let theta = grasp.theta_blocks();
    let (left, right) = split_hand_thetas(grasp.side, &theta);
    let transforms = body.forward_kinematics(pose, t_b, left, right)?;
    let posed = body.skin_mesh(&transforms);
    let body_palm: Vec<Point3<f64>> = body
        .palm_vertices(grasp.side)?
        .iter()
        .map(|&i| posed.vertices[i])
        .collect();

    let hand = body.hand(grasp.side);
    let hand_mesh = hand.posed_mesh(grasp)?;
    let hand_palm: Vec<Point3<f64>> = hand
        .palm_indices()
        .iter()
        .map(|&i| hand_mesh.vertices[i])
        .collect();

    let alignment = align_palm(&hand_palm, &body_palm)?;

    let wrist = transforms[grasp.side.wrist()].translation;
    let target = Vector3::new(provenance.target[0], provenance.target[1], provenance.target[2]);
    let low_quality = (wrist - target).norm() > wrist_dist_threshold;

    Ok(GraspScene {
        pose: pose.clone(),
        t_b: [t_b.x, t_b.y, t_b.z],
        grasp: grasp.clone(),
        object_transform: scene::rigid_to_rows(&alignment.transform),
        align_energy: alignment.energy,
        align_converged: alignment.converged,
        low_quality,
        provenance,
        object,
    })
}

/// Reflect a rotation block across the local x = 0 plane: `S·R·S` with
/// `S = diag(−1, 1, 1)`. Conjugating every hand rotation this way and
/// swapping the hand side yields the exact mirror-image hand, because the
/// two hand templates are vertex-exact x-mirrors of each other.
fn conjugate_block(block: &Rotation6D, what: &str) -> Rotation6D {
    let s = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
    let m = block
        .to_matrix()
        .unwrap_or_else(|e| panic!("mirror_grasp needs a valid scene: bad {what}: {e}"));
    Rotation6D::from_matrix(&(s * m * s))
}

/// Build the opposite-hand pseudo-scene: hand parameters and object
/// transform are reflected across the body's sagittal plane (spanned by the
/// pelvis frame, passing through the body root) while the body pose itself
/// stays fixed. Applying the mirror twice restores the original scene, and
/// all hand–object distances are preserved exactly (reflections are
/// isometries and the procedural objects are mirror-symmetric surfaces).
pub fn mirror_grasp(scene: &GraspScene) -> GraspScene {
    let s = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));

    // World reflection across the sagittal plane: normal = pelvis lateral
    // axis, anchored at the body root (the pelvis rests at the origin of
    // the root frame, so the plane passes through t_b).
    let pelvis = scene
        .pose
        .block(0)
        .to_matrix()
        .expect("mirror_grasp needs a valid scene: bad pelvis block");
    let n = (pelvis * Vector3::x()).normalize();
    let t_b = scene.t_b_vec();
    let refl = Matrix3::identity() - 2.0 * (n * n.transpose());
    let offset = 2.0 * n.dot(&t_b) * n;

    // New object placement = world reflection ∘ T ∘ local x-flip. Flipping
    // on both sides keeps the linear part a proper rotation, and the local
    // flip maps the object's mirror-symmetric surface onto itself.
    let t = scene.object_rigid();
    let mirrored = RigidTransform::new(refl * t.rotation * s, refl * t.translation + offset);

    let theta: Vec<_> = scene
        .grasp
        .theta_blocks()
        .iter()
        .map(|b| conjugate_block(b, "finger block").to_array())
        .collect();
    let grasp = HandGraspParams {
        theta,
        t_h: {
            let t_h = scene.grasp.t_h_vec();
            [-t_h.x, t_h.y, t_h.z]
        },
        r_h: conjugate_block(&scene.grasp.r_h_block(), "wrist block").to_array(),
        side: scene.grasp.side.opposite(),
    };

    GraspScene {
        pose: scene.pose.clone(),
        t_b: scene.t_b,
        grasp,
        object_transform: scene::rigid_to_rows(&mirrored),
        align_energy: scene.align_energy,
        align_converged: scene.align_converged,
        low_quality: scene.low_quality,
        provenance: scene.provenance.clone(),
        object: scene.object.clone(),
    }
}

#[cfg(test)]
mod tests;
