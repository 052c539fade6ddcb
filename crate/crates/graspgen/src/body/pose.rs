use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::tree::{
    finger_axes, Side, ABD_MAX, BODY_JOINTS, FLEX_MAX, FLEX_MIN, GRASP_DIM, HAND_DOF, HAND_JOINTS,
    POSE_DIM,
};
use super::BodyError;
use crate::geom::{axis_angle_to_matrix, Rotation6D};

/// Body pose: 22 six-d rotation blocks, flat. Block 0 is the global
/// orientation; blocks 1..21 articulate the body joints. The root
/// translation is carried alongside, not inside the vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseVector(pub Vec<f64>);

impl PoseVector {
    pub fn identity() -> Self {
        let mut v = vec![0.0; POSE_DIM];
        let id = Rotation6D::identity().to_array();
        for j in 0..BODY_JOINTS {
            v[j * 6..j * 6 + 6].copy_from_slice(&id);
        }
        Self(v)
    }

    pub fn from_vec(v: Vec<f64>) -> Result<Self, BodyError> {
        if v.len() != POSE_DIM {
            return Err(BodyError::BadDimension {
                what: "pose vector",
                want: POSE_DIM,
                got: v.len(),
            });
        }
        Ok(Self(v))
    }

    pub fn block(&self, j: usize) -> Rotation6D {
        Rotation6D::from_slice(&self.0[j * 6..j * 6 + 6])
    }

    pub fn set_block(&mut self, j: usize, r: &Rotation6D) {
        self.0[j * 6..j * 6 + 6].copy_from_slice(&r.to_array());
    }

    /// Decode every block, failing on the first degenerate one.
    pub fn rotations(&self) -> Result<Vec<nalgebra::Matrix3<f64>>, BodyError> {
        (0..BODY_JOINTS)
            .map(|j| {
                self.block(j)
                    .to_matrix()
                    .map_err(|e| BodyError::BadBlock { joint: j, source: e })
            })
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        (0..BODY_JOINTS).all(|j| !self.block(j).is_degenerate())
    }
}

/// Hinge articulation of one hand: per finger, proximal flexion and
/// abduction plus middle and distal flexion. Radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerDofs {
    /// [finger][0]=proximal flex, [1]=proximal abduction, [2]=middle flex,
    /// [3]=distal flex; finger order thumb, index, middle, ring, pinky.
    pub dof: [[f64; 4]; 5],
}

impl FingerDofs {
    pub fn flat() -> Self {
        Self { dof: [[0.0; 4]; 5] }
    }

    pub fn from_flat_slice(s: &[f64]) -> Self {
        assert_eq!(s.len(), HAND_DOF);
        let mut dof = [[0.0; 4]; 5];
        for f in 0..5 {
            dof[f].copy_from_slice(&s[f * 4..f * 4 + 4]);
        }
        Self { dof }
    }

    pub fn to_flat(&self) -> [f64; HAND_DOF] {
        let mut out = [0.0; HAND_DOF];
        for f in 0..5 {
            out[f * 4..f * 4 + 4].copy_from_slice(&self.dof[f]);
        }
        out
    }

    /// Clamp every angle into the hinge limits.
    pub fn clamped(&self) -> Self {
        let mut out = *self;
        for f in 0..5 {
            out.dof[f][0] = out.dof[f][0].clamp(FLEX_MIN, FLEX_MAX);
            out.dof[f][1] = out.dof[f][1].clamp(-ABD_MAX, ABD_MAX);
            out.dof[f][2] = out.dof[f][2].clamp(FLEX_MIN, FLEX_MAX);
            out.dof[f][3] = out.dof[f][3].clamp(FLEX_MIN, FLEX_MAX);
        }
        out
    }

    pub fn is_within_limits(&self) -> bool {
        self.dof.iter().all(|d| {
            (FLEX_MIN..=FLEX_MAX).contains(&d[0])
                && (-ABD_MAX..=ABD_MAX).contains(&d[1])
                && (FLEX_MIN..=FLEX_MAX).contains(&d[2])
                && (FLEX_MIN..=FLEX_MAX).contains(&d[3])
        })
    }

    /// Expand the 20 hinge angles into 15 six-d joint rotation blocks for
    /// the given side. Proximal blocks compose abduction then flexion.
    pub fn to_blocks(&self, side: Side) -> [Rotation6D; 15] {
        let axes = finger_axes(side);
        let mut out = [Rotation6D::identity(); 15];
        for f in 0..5 {
            let [flex_p, abd, flex_m, flex_d] = self.dof[f];
            let r_abd = axis_angle_to_matrix(&(axes[f].abduct * abd));
            let r_flex = axis_angle_to_matrix(&(axes[f].flex * flex_p));
            out[f * 3] = Rotation6D::from_matrix(&(r_abd * r_flex));
            out[f * 3 + 1] = Rotation6D::from_matrix(&axis_angle_to_matrix(&(axes[f].flex * flex_m)));
            out[f * 3 + 2] = Rotation6D::from_matrix(&axis_angle_to_matrix(&(axes[f].flex * flex_d)));
        }
        out
    }
}

/// Full hand grasp parameters: finger articulation, wrist translation,
/// wrist orientation, and which hand they articulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandGraspParams {
    /// 15 finger joint rotations (thumb..pinky × proximal, middle, distal).
    pub theta: Vec<Rotation6DArray>,
    pub t_h: [f64; 3],
    pub r_h: Rotation6DArray,
    pub side: Side,
}

/// Serde-friendly 6-scalar rotation block.
pub type Rotation6DArray = [f64; 6];

impl HandGraspParams {
    pub fn flat_hand(side: Side) -> Self {
        Self::from_dofs(&FingerDofs::flat(), Vector3::zeros(), Rotation6D::identity(), side)
    }

    pub fn from_dofs(dofs: &FingerDofs, t_h: Vector3<f64>, r_h: Rotation6D, side: Side) -> Self {
        let blocks = dofs.clamped().to_blocks(side);
        Self {
            theta: blocks.iter().map(|b| b.to_array()).collect(),
            t_h: [t_h.x, t_h.y, t_h.z],
            r_h: r_h.to_array(),
            side,
        }
    }

    pub fn theta_blocks(&self) -> Vec<Rotation6D> {
        self.theta.iter().map(|a| Rotation6D::from_slice(a)).collect()
    }

    pub fn t_h_vec(&self) -> Vector3<f64> {
        Vector3::new(self.t_h[0], self.t_h[1], self.t_h[2])
    }

    pub fn r_h_block(&self) -> Rotation6D {
        Rotation6D::from_slice(&self.r_h)
    }

    /// Flatten to the 99-scalar layout: 15×6 finger blocks, then t_h,
    /// then R_h.
    pub fn to_vec99(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(GRASP_DIM);
        for b in &self.theta {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.t_h);
        out.extend_from_slice(&self.r_h);
        out
    }

    pub fn from_vec99(v: &[f64], side: Side) -> Result<Self, BodyError> {
        if v.len() != GRASP_DIM {
            return Err(BodyError::BadDimension {
                what: "grasp vector",
                want: GRASP_DIM,
                got: v.len(),
            });
        }
        let mut theta = Vec::with_capacity(HAND_JOINTS);
        for j in 0..HAND_JOINTS {
            let mut b = [0.0; 6];
            b.copy_from_slice(&v[j * 6..j * 6 + 6]);
            theta.push(b);
        }
        let mut t_h = [0.0; 3];
        t_h.copy_from_slice(&v[90..93]);
        let mut r_h = [0.0; 6];
        r_h.copy_from_slice(&v[93..99]);
        Ok(Self { theta, t_h, r_h, side })
    }

    pub fn is_valid(&self) -> bool {
        !Rotation6D::from_slice(&self.r_h).is_degenerate()
            && self
                .theta
                .iter()
                .all(|b| !Rotation6D::from_slice(b).is_degenerate())
    }
}

/// Body shape coefficients: slot 0 is a global scale, slots 1..9 scale the
/// bone lengths of one body part group. All in [0.8, 1.2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyShape(pub [f64; 10]);

pub const SHAPE_MIN: f64 = 0.8;
pub const SHAPE_MAX: f64 = 1.2;

impl BodyShape {
    pub fn neutral() -> Self {
        Self([1.0; 10])
    }

    pub fn validate(&self) -> Result<(), BodyError> {
        for (i, &s) in self.0.iter().enumerate() {
            if !(SHAPE_MIN..=SHAPE_MAX).contains(&s) {
                return Err(BodyError::BadShape { slot: i, value: s });
            }
        }
        Ok(())
    }

    /// Sample a valid shape from uniform coefficients.
    pub fn sample(rng: &mut impl rand::Rng) -> Self {
        let mut s = [0.0; 10];
        for v in &mut s {
            *v = rng.gen_range(SHAPE_MIN..=SHAPE_MAX);
        }
        Self(s)
    }

    /// Part-group slot for a full-skeleton joint index.
    pub fn part_slot(joint: usize) -> usize {
        use super::tree::*;
        match joint {
            1..=3 => 1,                                     // torso
            NECK | HEAD => 2,                               // neck + head
            LEFT_COLLAR | RIGHT_COLLAR | LEFT_HIP | RIGHT_HIP => 3, // girdles
            LEFT_SHOULDER | LEFT_ELBOW | LEFT_WRIST => 4,   // left arm
            RIGHT_SHOULDER | RIGHT_ELBOW | RIGHT_WRIST => 5, // right arm
            15 | 16 => 6,                                   // left leg
            19 | 20 => 7,                                   // right leg
            17 | 21 => 8,                                   // feet
            j if j >= LEFT_HAND_BASE => 9,                  // hands
            _ => 0,                                         // pelvis root
        }
    }

    /// Length multiplier applied to the rest offset of `joint`.
    pub fn joint_multiplier(&self, joint: usize) -> f64 {
        let part = Self::part_slot(joint);
        if part == 0 {
            self.0[0]
        } else {
            self.0[0] * self.0[part]
        }
    }
}
