//! Assembled grasp scenes and their JSON form.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::body::{BodyError, BodyModel, HandGraspParams, PoseVector, Side};
use crate::geom::{RigidTransform, Rotation6D, TriMesh};
use crate::synth::{procedural_object, ObjectKind};

use super::{split_hand_thetas, AlignError};

/// Where a scene came from: the seeds and checkpoints that generated it and
/// the object recipe its mesh is rebuilt from after deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneProvenance {
    pub pose_seed: u64,
    pub grasp_seed: u64,
    pub object_kind: ObjectKind,
    /// Bounding-sphere radius of the procedural object (meters).
    pub object_radius: f64,
    /// Conditioning object location the body pose was diffused toward;
    /// the low-quality flag measures the wrist against this point.
    pub target: [f64; 3],
    pub diffusion_checkpoint: String,
    pub cvae_checkpoint: String,
}

impl Default for SceneProvenance {
    fn default() -> Self {
        Self {
            pose_seed: 0,
            grasp_seed: 0,
            object_kind: ObjectKind::Sphere,
            object_radius: 0.03,
            target: [0.0; 3],
            diffusion_checkpoint: String::new(),
            cvae_checkpoint: String::new(),
        }
    }
}

/// A body pose holding an object: the diffused pose (with the grasp's
/// finger articulation substituted into the grasp-side hand), the grasp
/// parameters in the object frame, and the rigid transform that carries the
/// object (and with it the grasp hand) into the world.
///
/// The JSON form stores pose + t_b, grasp parameters, the object transform
/// as a row-major 4×4 matrix, alignment diagnostics and provenance; the
/// object mesh itself is rebuilt from the provenance recipe on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspScene {
    /// 132-scalar body pose (22 × 6D rotation blocks).
    pub pose: PoseVector,
    /// Body root translation (meters).
    pub t_b: [f64; 3],
    pub grasp: HandGraspParams,
    /// Object-local → world placement, row-major 4×4 (last row 0 0 0 1).
    pub object_transform: [[f64; 4]; 4],
    /// Mean per-vertex palm distance at the accepted alignment (meters).
    pub align_energy: f64,
    pub align_converged: bool,
    /// Set when the body wrist ended up far from the conditioning target.
    pub low_quality: bool,
    pub provenance: SceneProvenance,
    /// Object mesh in its local frame; not serialized (see provenance).
    #[serde(skip)]
    pub object: TriMesh,
}

/// Encode a rigid transform as a row-major homogeneous 4×4 matrix.
pub(super) fn rigid_to_rows(t: &RigidTransform) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = t.rotation[(r, c)];
        }
        m[r][3] = t.translation[r];
    }
    m[3][3] = 1.0;
    m
}

pub(super) fn rows_to_rigid(m: &[[f64; 4]; 4]) -> RigidTransform {
    let mut rot = Matrix3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            rot[(r, c)] = m[r][c];
        }
    }
    RigidTransform::new(rot, Vector3::new(m[0][3], m[1][3], m[2][3]))
}

impl GraspScene {
    pub fn side(&self) -> Side {
        self.grasp.side
    }

    pub fn t_b_vec(&self) -> Vector3<f64> {
        Vector3::new(self.t_b[0], self.t_b[1], self.t_b[2])
    }

    /// The object placement as a rigid transform.
    pub fn object_rigid(&self) -> RigidTransform {
        rows_to_rigid(&self.object_transform)
    }

    /// Object mesh carried into the world frame.
    pub fn object_world(&self) -> TriMesh {
        self.object.transformed(&self.object_rigid())
    }

    /// Grasp-side hand articulation as decoded rotation blocks.
    pub fn hand_theta(&self) -> Vec<Rotation6D> {
        self.grasp.theta_blocks()
    }

    /// Re-skin the body for this scene: the stored pose with the grasp's
    /// finger articulation substituted into the grasp-side hand.
    pub fn posed_body(&self, body: &BodyModel) -> Result<TriMesh, BodyError> {
        let theta = self.grasp.theta_blocks();
        let (left, right) = split_hand_thetas(self.grasp.side, &theta);
        body.posed_mesh(&self.pose, &self.t_b_vec(), left, right)
    }

    pub fn to_json(&self) -> Result<String, AlignError> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parse a scene and rebuild its object mesh from the provenance
    /// recipe (kind + radius).
    pub fn from_json(s: &str) -> Result<Self, AlignError> {
        let mut scene: GraspScene = serde_json::from_str(s)?;
        scene.object =
            procedural_object(scene.provenance.object_kind, scene.provenance.object_radius);
        Ok(scene)
    }
}
