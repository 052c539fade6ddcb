use nalgebra::{Point3, Vector3};

use super::pose::{HandGraspParams, PoseVector};
use super::template::{hand_joint_parent, BodyModel, HandModel, SkinVertex, HAND_WRIST_ID};
use super::tree::{BODY_JOINTS, HAND_JOINTS, TOTAL_JOINTS};
use super::BodyError;
use crate::geom::{RigidTransform, Rotation6D, TriMesh};

/// A labeled skeleton joint in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonJoint {
    pub name: String,
    pub index: usize,
    pub position: Point3<f64>,
}

fn decode_block(r: &Rotation6D, joint: usize) -> Result<nalgebra::Matrix3<f64>, BodyError> {
    r.to_matrix().map_err(|e| BodyError::BadBlock { joint, source: e })
}

impl BodyModel {
    /// World transforms of all 52 joints. Hand articulation defaults to the
    /// flat rest hand when no finger blocks are given.
    pub fn forward_kinematics(
        &self,
        pose: &PoseVector,
        t_b: &Vector3<f64>,
        left_theta: Option<&[Rotation6D]>,
        right_theta: Option<&[Rotation6D]>,
    ) -> Result<Vec<RigidTransform>, BodyError> {
        for theta in [left_theta, right_theta].into_iter().flatten() {
            if theta.len() != HAND_JOINTS {
                return Err(BodyError::BadDimension {
                    what: "hand articulation",
                    want: HAND_JOINTS,
                    got: theta.len(),
                });
            }
        }
        let mut out: Vec<RigidTransform> = Vec::with_capacity(TOTAL_JOINTS);
        for j in 0..TOTAL_JOINTS {
            let rot = if j < BODY_JOINTS {
                decode_block(&pose.block(j), j)?
            } else {
                let (theta, base) = if j < super::tree::RIGHT_HAND_BASE {
                    (left_theta, super::tree::LEFT_HAND_BASE)
                } else {
                    (right_theta, super::tree::RIGHT_HAND_BASE)
                };
                match theta {
                    Some(t) => decode_block(&t[j - base], j)?,
                    None => nalgebra::Matrix3::identity(),
                }
            };
            let local = RigidTransform::new(rot, self.tree.offset(j));
            let world = match self.tree.joints[j].parent {
                Some(p) => out[p].compose(&local),
                None => RigidTransform::from_translation(*t_b).compose(&local),
            };
            out.push(world);
        }
        Ok(out)
    }

    /// Joint positions only.
    pub fn joint_positions(
        &self,
        pose: &PoseVector,
        t_b: &Vector3<f64>,
    ) -> Result<Vec<Point3<f64>>, BodyError> {
        Ok(self
            .forward_kinematics(pose, t_b, None, None)?
            .iter()
            .map(|t| Point3::from(t.translation))
            .collect())
    }

    /// Linear blend skinning against precomputed joint transforms.
    pub fn skin_mesh(&self, transforms: &[RigidTransform]) -> TriMesh {
        assert_eq!(transforms.len(), TOTAL_JOINTS);
        let rest = self.tree.rest_positions();
        // Skinning matrix per joint: world ∘ inverse-rest.
        let mats: Vec<RigidTransform> = (0..TOTAL_JOINTS)
            .map(|j| transforms[j].compose(&RigidTransform::from_translation(-rest[j])))
            .collect();
        skin_vertices(&self.mesh, &self.skin, &mats, None)
    }

    /// FK + skinning in one call.
    pub fn posed_mesh(
        &self,
        pose: &PoseVector,
        t_b: &Vector3<f64>,
        left_theta: Option<&[Rotation6D]>,
        right_theta: Option<&[Rotation6D]>,
    ) -> Result<TriMesh, BodyError> {
        let t = self.forward_kinematics(pose, t_b, left_theta, right_theta)?;
        Ok(self.skin_mesh(&t))
    }

    /// All 52 labeled joints (22 body + 15 per hand), in skeleton order.
    pub fn skeleton_joints(
        &self,
        pose: &PoseVector,
        t_b: &Vector3<f64>,
        left_theta: Option<&[Rotation6D]>,
        right_theta: Option<&[Rotation6D]>,
    ) -> Result<Vec<SkeletonJoint>, BodyError> {
        let t = self.forward_kinematics(pose, t_b, left_theta, right_theta)?;
        Ok(t.iter()
            .enumerate()
            .map(|(i, tr)| SkeletonJoint {
                name: self.tree.joints[i].name.clone(),
                index: i,
                position: Point3::from(tr.translation),
            })
            .collect())
    }
}

impl HandModel {
    /// World transforms of the 15 finger joints given the wrist transform.
    pub fn joint_transforms(
        &self,
        theta: &[Rotation6D],
        root: &RigidTransform,
    ) -> Result<Vec<RigidTransform>, BodyError> {
        if theta.len() != HAND_JOINTS {
            return Err(BodyError::BadDimension {
                what: "hand articulation",
                want: HAND_JOINTS,
                got: theta.len(),
            });
        }
        let mut out: Vec<RigidTransform> = Vec::with_capacity(HAND_JOINTS);
        for j in 0..HAND_JOINTS {
            let rot = decode_block(&theta[j], j)?;
            let off = Vector3::new(
                self.joint_offsets[j][0],
                self.joint_offsets[j][1],
                self.joint_offsets[j][2],
            );
            let local = RigidTransform::new(rot, off);
            let world = match hand_joint_parent(j) {
                Some(p) => out[p].compose(&local),
                None => root.compose(&local),
            };
            out.push(world);
        }
        Ok(out)
    }

    /// Skin the hand under the given articulation and wrist transform.
    pub fn skinned(
        &self,
        theta: &[Rotation6D],
        root: &RigidTransform,
    ) -> Result<TriMesh, BodyError> {
        let joints = self.joint_transforms(theta, root)?;
        let rest = self.rest_joints();
        let mut mats: Vec<RigidTransform> = (0..HAND_JOINTS)
            .map(|j| joints[j].compose(&RigidTransform::from_translation(-rest[j].coords)))
            .collect();
        // Wrist slot: rest wrist is the hand-frame origin.
        mats.push(*root);
        Ok(skin_vertices(&self.mesh, &self.skin, &mats, None))
    }

    /// Skin only the given vertex subset; returns positions aligned with
    /// `subset`. Avoids touching the whole hand when a caller repeatedly
    /// re-poses one finger.
    pub fn skinned_subset(
        &self,
        theta: &[Rotation6D],
        root: &RigidTransform,
        subset: &[usize],
    ) -> Result<Vec<Point3<f64>>, BodyError> {
        let joints = self.joint_transforms(theta, root)?;
        let rest = self.rest_joints();
        let mut mats: Vec<RigidTransform> = (0..HAND_JOINTS)
            .map(|j| joints[j].compose(&RigidTransform::from_translation(-rest[j].coords)))
            .collect();
        mats.push(*root);
        let skinned = skin_vertices(&self.mesh, &self.skin, &mats, Some(subset));
        Ok(subset.iter().map(|&i| skinned.vertices[i]).collect())
    }

    /// Pose the hand from full grasp params (applies R_h, t_h as the wrist).
    pub fn posed_mesh(&self, params: &HandGraspParams) -> Result<TriMesh, BodyError> {
        if params.side != self.side {
            return Err(BodyError::SideMismatch {
                want: self.side,
                got: params.side,
            });
        }
        let root = RigidTransform::new(
            decode_block(&params.r_h_block(), HAND_WRIST_ID as usize)?,
            params.t_h_vec(),
        );
        self.skinned(&params.theta_blocks(), &root)
    }

    /// Fingertip world positions under an articulation.
    pub fn fingertip_positions(
        &self,
        theta: &[Rotation6D],
        root: &RigidTransform,
    ) -> Result<Vec<Point3<f64>>, BodyError> {
        let joints = self.joint_transforms(theta, root)?;
        Ok((0..5)
            .map(|f| {
                let tip = Vector3::new(
                    self.fingertips[f][0],
                    self.fingertips[f][1],
                    self.fingertips[f][2],
                );
                joints[f * 3 + 2].apply_point(&Point3::from(tip))
            })
            .collect())
    }
}

fn skin_vertices(
    mesh: &TriMesh,
    skin: &[SkinVertex],
    mats: &[RigidTransform],
    subset: Option<&[usize]>,
) -> TriMesh {
    let mut out = mesh.clone();
    let apply = |i: usize, out: &mut TriMesh| {
        let v = mesh.vertices[i];
        let s = &skin[i];
        let mut acc = Vector3::zeros();
        let mut total = 0.0;
        for slot in 0..4 {
            let w = s.weights[slot];
            if w > 0.0 {
                acc += mats[s.joints[slot] as usize].apply_point(&v).coords * w;
                total += w;
            }
        }
        // Renormalize so stored-precision weights still partition unity.
        out.vertices[i] = Point3::from(acc / total);
    };
    match subset {
        Some(idx) => {
            for &i in idx {
                apply(i, &mut out);
            }
        }
        None => {
            for i in 0..mesh.vertices.len() {
                apply(i, &mut out);
            }
        }
    }
    out
}
